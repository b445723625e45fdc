import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_dsms.trace_io import (
    ArrivalProcess,
    Burst,
    SyntheticConfig,
    TraceParseError,
    TraceRecord,
    format_trace_line,
    generate_synthetic,
    load_trace,
    merge_streams,
    parse_trace_line,
)


class TestParse:
    def test_tcp(self):
        rec = parse_trace_line("0.5 1 2 80 443 1500")
        assert rec.ts == 0.5 and rec.len == 1500
        assert rec.stream == "tcp" and len(rec.attrs) == 5

    def test_udp(self):
        rec = parse_trace_line("0.5 1 2 80 443")
        assert rec.len is None
        assert len(rec.attrs) == 4 and rec.stream == "udp"

    def test_tabs_and_comment(self):
        rec = parse_trace_line("1.25\t3  4\t5 6   # trailing note")
        assert rec.attrs == (3, 4, 5, 6)

    @pytest.mark.parametrize(
        "line",
        ["0.5 1 2 80", "0.5 1 2 80 443 1500 9", "x 1 2 3 4", "0.5 1 2 eighty 443", "0.5 1 -2 80 443", "-1 1 2 3 4", "nan 1 2 3 4", "0.5 1 2 3 4.5"],
    )
    def test_rejects(self, line):
        with pytest.raises(TraceParseError):
            parse_trace_line(line, line_no=7)

    def test_error_carries_line(self):
        with pytest.raises(TraceParseError) as err:
            parse_trace_line("0.5 1 2 80", line_no=12)
        assert err.value.line_no == 12
        assert "12" in str(err.value)


@given(
    ts=st.floats(0, 1e7, allow_nan=False),
    ints=st.lists(st.integers(0, 2**40), min_size=4, max_size=5),
)
def test_round_trip(ts, ints):
    rec = TraceRecord(ts, *ints)
    line = format_trace_line(rec)
    assert parse_trace_line(line) == rec
    assert format_trace_line(parse_trace_line(line)) == line


class TestLoad:
    def test_empty(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("")
        wl = load_trace(path)
        assert len(wl) == 0

    def test_sorted(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("# header\n3.0 1 1 1 1 60\n\n1.0 2 2 2 2\n2.0 3 3 3 3 40\n")
        wl = load_trace(path)
        assert [t.arrival for t in wl.tuples] == [1000.0, 2000.0, 3000.0]
        assert [t.stream for t in wl.tuples] == ["udp", "tcp", "tcp"]

    def test_time_scale(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("100 1 2 3 4 5\n")
        t = load_trace(path, time_scale=0.01).tuples[0]
        assert t.arrival == pytest.approx(1000.0)
        assert t.ts == pytest.approx(100_000.0)

    def test_error_has_file_and_line(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1.0 1 2 3 4\n# c\n2.0 1 2\n")
        with pytest.raises(TraceParseError) as err:
            load_trace(path)
        assert err.value.line_no == 3
        assert str(path) in str(err.value)

    def test_bad_scale(self, tmp_path):
        path = tmp_path / "t.txt"
        path.write_text("")
        with pytest.raises(ValueError):
            load_trace(path, time_scale=0)


class TestSynthetic:
    def test_constant_count_and_spacing(self):
        wl = generate_synthetic(SyntheticConfig(rate=1000, process=ArrivalProcess.CONSTANT), 1000)
        times = np.array([t.arrival for t in wl.tuples])
        assert len(times) == 1000
        np.testing.assert_allclose(np.diff(times), 1.0)

    def test_poisson_count(self):
        wl = generate_synthetic(SyntheticConfig(rate=1000, seed=42), 10_000)
        # Poisson(10000): 3 sigma = 300
        assert abs(len(wl) - 10_000) <= 300

    def test_poisson_count_over_seeds(self):
        counts = [len(generate_synthetic(SyntheticConfig(rate=200, seed=s), 5000)) for s in range(30)]
        assert abs(np.mean(counts) - 1000) < 3 * np.sqrt(1000 / 30)

    def test_deterministic(self):
        cfg = SyntheticConfig(rate=500, seed=9, burst=Burst(100, 200, 4.0, every_ms=1000))
        a = generate_synthetic(cfg, 3000).tuples
        b = generate_synthetic(cfg, 3000).tuples
        assert a == b

    def test_attrs_in_range(self):
        ranges = ((0, 3), (10, 10), (5, 6), (0, 1))
        wl = generate_synthetic(SyntheticConfig(rate=2000, stream="udp", attr_ranges=ranges), 500)
        for t in wl.tuples:
            assert t.attr_count == 4
            assert all(lo <= v <= hi for v, (lo, hi) in zip(t.attrs, ranges))

    def test_burst_multiplies_rate(self):
        cfg = SyntheticConfig(rate=1000, process=ArrivalProcess.CONSTANT, burst=Burst(1000, 500, 4.0))
        times = np.array([t.arrival for t in generate_synthetic(cfg, 3000).tuples])
        assert np.sum((times >= 1000) & (times < 1500)) == 2000
        assert np.sum(times < 1000) == 1000

    def test_nondecreasing(self):
        cfg = SyntheticConfig(rate=3000, seed=1, burst=Burst(0, 50, 3.0, every_ms=200))
        times = [t.arrival for t in generate_synthetic(cfg, 2000).tuples]
        assert times == sorted(times)

    def test_validation(self):
        with pytest.raises(ValueError):
            SyntheticConfig(rate=0)
        with pytest.raises(ValueError):
            Burst(0, 10, 0.5)
        with pytest.raises(ValueError):
            generate_synthetic(SyntheticConfig(rate=1), 0)


def test_merge_orders_and_keeps_ties_stable():
    a = generate_synthetic(SyntheticConfig(rate=1000, process=ArrivalProcess.CONSTANT, stream="tcp"), 100)
    b = generate_synthetic(SyntheticConfig(rate=1000, process=ArrivalProcess.CONSTANT, stream="udp"), 50)
    m = merge_streams([a, b])
    assert len(m) == 150
    times = [t.arrival for t in m.tuples]
    assert times == sorted(times)
    assert [t.stream for t in m.tuples[:2]] == ["tcp", "udp"]
    assert m.horizon_ms == 50
