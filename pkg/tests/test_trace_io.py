import pytest

from hioasec.engine import TraceRecord, run
from hioasec.errors import ParseError
from hioasec.trace_io import HEADER, dumps_trace, export_trace, format_value, import_trace, loads_trace, parse_value


def test_value_formatting():
    assert format_value(True) == "true" and format_value(False) == "false"
    assert format_value(3) == "3"
    assert format_value(0.1) == "0.1"
    for text in ("true", "false", "3", "0.1", "1e-300"):
        assert format_value(parse_value(text)) == text


def test_layout():
    rec = TraceRecord(0, 0.0, "1", "normal", (("x_1", (0.5, 0.25)), ("flag", True), ("e", ())))
    text = dumps_trace([rec])
    lines = text.splitlines()
    assert lines[0] == ",".join(HEADER)
    assert lines[1:] == [
        "0,0.0,1,normal,x_1[0],0.5",
        "0,0.0,1,normal,x_1[1],0.25",
        "0,0.0,1,normal,flag,true",
        "0,0.0,1,normal,e[],",
    ]
    assert loads_trace(text) == [rec]


def test_round_trip(der1, tmp_path):
    res = run(der1.game, der1.modules(), der1.events, der1.params, 25)
    path = tmp_path / "trace.csv"
    export_trace(res.trace, path)
    back = import_trace(path)
    assert back == res.trace
    assert dumps_trace(back) == path.read_text()


def test_bad_files():
    with pytest.raises(ParseError):
        loads_trace("")
    with pytest.raises(ParseError):
        loads_trace("a,b\n")
    with pytest.raises(ParseError) as info:
        loads_trace(",".join(HEADER) + "\n0,0.0,1\n")
    assert info.value.line == 2
    with pytest.raises(ValueError):
        export_trace([], "x.json", format="json")
