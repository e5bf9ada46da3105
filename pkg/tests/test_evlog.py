import random
import socket
import string
import threading
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corridor.evlog import (
    BACKEND_TAGS,
    Collector,
    CollectorSink,
    EventLogger,
    EventRecord,
    FileSink,
    MemorySink,
    VIEWER_TAGS,
    VOCABULARY,
    analyze_log,
    analyze_records,
    merge_records,
    parse_line,
    parse_log,
    serialize_record,
)
from corridor.evlog.plot import plot_records
from corridor.evlog.records import RecordFormatError
from conftest import wait_until

TOKEN = string.ascii_letters + string.digits + "_.-:/"


def random_record(rng: random.Random) -> EventRecord:
    def token(k=8):
        return "".join(rng.choice(TOKEN) for _ in range(rng.randint(1, k)))

    extra = {f"k{i}_{token(4)}": token(6) for i in range(rng.randint(0, 3))}
    return EventRecord(
        ts_us=rng.randrange(0, 2**52),
        host=token(),
        prog=token(),
        tag=rng.choice(VOCABULARY + (token(),)),
        frame=rng.randrange(-1, 10_000),
        worker=rng.randrange(-1, 64),
        extra=extra,
    )


class TestRecordFormat:
    def test_round_trip_1000_random_records(self):
        rng = random.Random(99)
        records = [random_record(rng) for _ in range(1000)]
        for rec in records:
            assert parse_line(serialize_record(rec)) == rec

    @given(
        ts=st.integers(0, 2**52),
        frame=st.integers(-1, 10**6),
        worker=st.integers(-1, 1000),
        tag=st.text(alphabet=TOKEN, min_size=1, max_size=20),
        value=st.text(alphabet=TOKEN, min_size=0, max_size=20),
    )
    @settings(max_examples=200)
    def test_round_trip_property(self, ts, frame, worker, tag, value):
        rec = EventRecord(ts, "h1", "prog", tag, frame, worker, {"key": value})
        assert parse_line(serialize_record(rec)) == rec

    def test_line_shape(self):
        rec = EventRecord(123, "h", "p", "BE_LOAD_START", 0, 2, {"bytes": "99"})
        assert serialize_record(rec) == "ts=123 host=h prog=p tag=BE_LOAD_START frame=0 worker=2 bytes=99"

    def test_rejects_whitespace_value(self):
        rec = EventRecord(1, "h", "p", "T", 0, 0, {"k": "a b"})
        with pytest.raises(RecordFormatError):
            serialize_record(rec)

    def test_rejects_missing_fields(self):
        with pytest.raises(RecordFormatError):
            parse_line("ts=1 host=h prog=p tag=T frame=0")

    def test_vocabulary_is_exact(self):
        assert VIEWER_TAGS == (
            "V_FRAME_START",
            "V_LIGHTPAYLOAD_START",
            "V_LIGHTPAYLOAD_END",
            "V_HEAVYPAYLOAD_START",
            "V_HEAVYPAYLOAD_END",
            "V_FRAME_END",
        )
        assert BACKEND_TAGS == (
            "BE_LOAD_START",
            "BE_LOAD_END",
            "BE_LIGHT_SEND",
            "BE_LIGHT_END",
            "BE_RENDER_START",
            "BE_RENDER_END",
            "BE_HEAVY_SEND",
            "BE_HEAVY_END",
        )
        assert len(VOCABULARY) == 14

    def test_merge_sorted(self):
        rng = random.Random(5)
        a = [random_record(rng) for _ in range(50)]
        b = [random_record(rng) for _ in range(50)]
        merged = merge_records(a, b)
        assert len(merged) == 100
        assert all(x.ts_us <= y.ts_us for x, y in zip(merged, merged[1:]))


class TestEmit:
    def test_single_emit_fields(self):
        sink = MemorySink()
        logger = EventLogger("backend", sink, host="hosta")
        logger.emit("BE_LOAD_START", frame=0, worker=0)
        rec = sink.records[0]
        assert rec.tag == "BE_LOAD_START" and rec.frame == 0 and rec.worker == 0
        assert rec.host == "hosta" and rec.prog == "backend"

    def test_timestamps_non_decreasing_across_1000_emits(self):
        sink = MemorySink()
        logger = EventLogger("p", sink)
        for i in range(1000):
            logger.emit("T", frame=i)
        stamps = [r.ts_us for r in sink.records]
        assert all(a <= b for a, b in zip(stamps, stamps[1:]))
        assert len(stamps) == 1000

    def test_collector_down_spools_locally(self, tmp_path):
        spool = tmp_path / "spool.evlog"
        dead_port = _free_port()
        sink = CollectorSink(("127.0.0.1", dead_port), spool)
        logger = EventLogger("p", sink)
        for i in range(5):
            logger.emit("T", frame=i)
        logger.close()
        assert sink.failed and sink.spooled == 5
        assert logger.collector_failed
        spooled = parse_log(spool)
        assert [r.frame for r in spooled] == list(range(5))


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


class TestCollector:
    def test_three_emitters_thirty_records(self, tmp_path):
        path = tmp_path / "events.log"
        with Collector(path) as collector:
            loggers = [
                EventLogger(f"prog{i}", CollectorSink(collector.endpoint, tmp_path / f"s{i}"))
                for i in range(3)
            ]
            for i, logger in enumerate(loggers):
                for j in range(10):
                    logger.emit("T", frame=j, worker=i)
            for logger in loggers:
                logger.close()
            assert wait_until(lambda: collector.count == 30)
        records = parse_log(path)
        assert len(records) == 30

    def test_empty_session_is_valid(self, tmp_path):
        path = tmp_path / "empty.log"
        with Collector(path):
            pass
        assert path.exists()
        assert parse_log(path) == []

    def test_concurrent_emitters_line_atomicity(self, tmp_path):
        path = tmp_path / "events.log"
        with Collector(path) as collector:
            def blast(i):
                logger = EventLogger(
                    f"prog{i}", CollectorSink(collector.endpoint, tmp_path / f"sp{i}")
                )
                for j in range(200):
                    logger.emit("T" * 40, frame=j, worker=i, extra={"pad": "x" * 200})
                logger.close()

            threads = [threading.Thread(target=blast, args=(i,)) for i in range(4)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert wait_until(lambda: collector.count == 800, timeout=10.0)
        records = parse_log(path)  # parse failure would mean torn lines
        assert len(records) == 800

    def test_disk_error_stops_collector(self, tmp_path, monkeypatch):
        path = tmp_path / "events.log"
        collector = Collector(path)
        collector.start()

        def boom(_line):
            raise OSError(28, "No space left on device")

        monkeypatch.setattr(collector._fh, "write", boom)
        assert collector.append("x=1") is False
        assert collector.error is not None
        collector.stop()


def synthetic_frame_records(worker=0, frame=0, t0=0, load=15_000_000, render=12_000_000):
    """One frame's eight tags; load/render durations in microseconds."""
    seq = [
        ("BE_LOAD_START", t0),
        ("BE_LOAD_END", t0 + load),
        ("BE_LIGHT_SEND", t0 + load + 10),
        ("BE_LIGHT_END", t0 + load + 20),
        ("BE_RENDER_START", t0 + load + 30),
        ("BE_RENDER_END", t0 + load + 30 + render),
        ("BE_HEAVY_SEND", t0 + load + 40 + render),
        ("BE_HEAVY_END", t0 + load + 50 + render),
    ]
    return [EventRecord(ts, "h", "backend", tag, frame, worker) for tag, ts in seq]


class TestAnalyze:
    def test_load_time_displacement(self):
        records = synthetic_frame_records(load=15_000_000, render=12_000_000)
        report = analyze_records(records)
        assert report.mean_load_s == pytest.approx(15.0)
        assert report.mean_render_s == pytest.approx(12.0)
        assert report.violations == []

    def test_incomplete_frame_excluded(self):
        records = synthetic_frame_records(frame=0)
        records += [r for r in synthetic_frame_records(frame=1, t0=50_000_000)
                    if r.tag != "BE_RENDER_END"]
        report = analyze_records(records)
        assert (0, 1) in report.incomplete
        assert report.mean_load_s == pytest.approx(15.0)

    def test_out_of_order_flagged(self):
        records = synthetic_frame_records()
        records[0], records[4] = (
            EventRecord(records[4].ts_us, "h", "backend", records[0].tag, 0, 0),
            EventRecord(records[0].ts_us, "h", "backend", records[4].tag, 0, 0),
        )
        report = analyze_records(records)
        assert report.violations

    def test_load_throughput_from_bytes(self):
        records = synthetic_frame_records(load=3_000_000)
        records[1] = EventRecord(
            records[1].ts_us, "h", "backend", "BE_LOAD_END", 0, 0, {"bytes": "160000000"}
        )
        report = analyze_records(records)
        assert report.mean_load_mbps == pytest.approx(426.67, abs=0.01)


class TestPlot:
    def test_empty_log_errors(self, tmp_path):
        with pytest.raises(ValueError):
            plot_records([], tmp_path / "x.svg")

    def test_serial_two_frames_two_polylines(self, tmp_path):
        records = synthetic_frame_records(frame=0) + synthetic_frame_records(
            frame=1, t0=40_000_000
        )
        out = tmp_path / "serial.svg"
        info = plot_records(records, out)
        assert out.exists()
        assert info.polyline_count == 2
        assert info.lifelines == list(BACKEND_TAGS)

    def test_merged_log_has_14_lifelines_viewer_on_top(self, tmp_path):
        records = synthetic_frame_records()
        base = 100_000
        for i, tag in enumerate(VIEWER_TAGS):
            records.append(EventRecord(base + i, "h", "viewer", tag, 0, 0))
        info = plot_records(records, tmp_path / "merged.svg")
        assert len(info.lifelines) == 14
        assert info.lifelines[:8] == list(BACKEND_TAGS)
        assert info.lifelines[8:] == list(VIEWER_TAGS)

    def test_plot_log_round_trip(self, tmp_path):
        path = tmp_path / "log.log"
        with open(path, "w") as fh:
            for rec in synthetic_frame_records():
                fh.write(serialize_record(rec) + "\n")
        report = analyze_log(path)
        assert report.record_count == 8
        from corridor.evlog.plot import plot_log

        info = plot_log(path, tmp_path / "out.svg")
        assert info.polyline_count == 1


class TestFileSink:
    def test_appends_lines(self, tmp_path):
        path = tmp_path / "spool.evlog"
        sink = FileSink(path)
        logger = EventLogger("p", sink)
        logger.emit("A")
        logger.emit("B")
        logger.close()
        assert [r.tag for r in parse_log(path)] == ["A", "B"]
