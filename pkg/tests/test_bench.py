import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagvc.bench import AXES, aggregate, build_instance, load_config, run_sweep, write_results, write_summary
from dagvc.bench.config import ExperimentConfig, parse_config
from dagvc.bench.harness import CSV_HEADER, MetricsRow, n_workers, read_results
from dagvc.dag import dag_to_dict
from dagvc.errors import ConfigError, EmptyInput

SMALL = """
[experiment]
axis = n_subtasks
values = 6, 9
trials = 3
schedulers = rfid, heft, la, mga
timing = false

[dag]
n_layers = 4

[vc]
n_vehicles = 8
horizon = 40

[mga]
population = 6
generations = 3
"""


def row(value=1, otc=None, success=None, sched="rfid", runtime=None):
    if success is None:
        success = int(otc is not None)
    return MetricsRow(sched, "n_subtasks", value, 0, 10, 10, 3, 1.0, otc, success, runtime)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg.trials == 200 and cfg.axis == "n_subtasks" and cfg.values[0] == 15
        assert cfg.schedulers == ["rfid", "heft", "la", "mga"]
        assert cfg.channel.gamma_a == 0.15 and cfg.channel.gamma_b == 0.001 and cfg.channel.theta == 0.9
        assert cfg.rfid["cti_sign_mode"] == "absolute"

    def test_reads_sections(self):
        cfg = parse_config(SMALL)
        assert cfg.values == [6, 9] and cfg.dag.n_layers == 4 and cfg.vc.n_vehicles == 8
        assert cfg.mga["population"] == 6 and cfg.timing is False

    def test_float_axis(self):
        cfg = parse_config("[experiment]\naxis = ccr\nvalues = 0.5, 1.2\n")
        assert cfg.values == [0.5, 1.2]
        assert cfg.cell(0.5)["ccr"] == 0.5

    @pytest.mark.parametrize(
        "text",
        [
            "[bogus]\nx = 1\n",
            "[dag]\nsize = 3\n",
            "[experiment]\naxis = speed\n",
            "[experiment]\ntrials = 0\n",
            "[experiment]\ntrials = many\n",
            "[experiment]\nschedulers = rfid, magic\n",
            "[experiment]\nschedulers = rfid, rfid\n",
            "[experiment]\nvalues = 5, 40\n[dag]\nn_layers = 10\n",
            "[channel]\ntheta = 1.5\n",
            "[rfid]\ncti_sign_mode = backwards\n",
            "[mga]\nelite = 80\n",
            "[vc]\ncontact_mode = psychic\n",
            "[experiment]\ntiming = perhaps\n",
            "no section header\n",
        ],
    )
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_config(tmp_path / "nope.ini")

    def test_vehicle_axis_changes_trace_only(self):
        cfg = parse_config("[experiment]\naxis = n_vehicles\nvalues = 20, 60\n")
        assert cfg.trace_params(60).n_vehicles == 60
        assert cfg.dag_params(60) == cfg.dag


class TestSweep:
    def test_single_row(self):
        cfg = ExperimentConfig(values=[12], trials=1, schedulers=["rfid"])
        rows = run_sweep(cfg, workers=1)
        assert len(rows) == 1 and rows[0].scheduler == "rfid" and rows[0].n_subtasks == 12

    def test_cardinality_and_order(self):
        cfg = parse_config(SMALL)
        rows = run_sweep(cfg, workers=1)
        assert len(rows) == 2 * 3 * 4
        keys = [(r.value, r.seed, cfg.schedulers.index(r.scheduler)) for r in rows]
        assert keys == sorted(keys)
        assert all(r.success in (0, 1) and (r.otc_s is None) == (not r.success) for r in rows)
        assert all(r.sched_runtime_ms is None for r in rows)

    def test_parallel_matches_serial(self, tmp_path):
        cfg = parse_config(SMALL)
        write_results(run_sweep(cfg, workers=1), tmp_path / "a.csv")
        write_results(run_sweep(cfg, workers=2), tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_instances_depend_on_position_only(self):
        cfg = parse_config(SMALL)
        a = build_instance(cfg, 1, 2)
        b = build_instance(cfg, 1, 2)
        c = build_instance(cfg, 1, 1)
        assert dag_to_dict(a.dag.task) == dag_to_dict(b.dag.task)
        assert a.trace._x == b.trace._x
        assert dag_to_dict(a.dag.task) != dag_to_dict(c.dag.task)
        other = parse_config(SMALL.replace("trials = 3", "trials = 5"))
        assert dag_to_dict(build_instance(other, 1, 2).dag.task) == dag_to_dict(a.dag.task)

    def test_seed_changes_instances(self):
        cfg = parse_config(SMALL)
        cfg2 = parse_config(SMALL)
        cfg2.base_seed = 1
        assert dag_to_dict(build_instance(cfg, 0, 0).dag.task) != dag_to_dict(build_instance(cfg2, 0, 0).dag.task)

    def test_thread_cap(self, monkeypatch):
        monkeypatch.setenv("DAGVC_THREADS", "1")
        assert n_workers() == 1
        monkeypatch.setenv("DAGVC_THREADS", "junk")
        assert n_workers() >= 1


class TestAggregate:
    def test_single(self):
        out = aggregate([row(otc=6.2233)])
        stats = out["rfid", 1]
        assert stats["mean_otc"] == 6.2233 and stats["ci95_otc"] == 0.0 and stats["success_rate"] == 1.0

    def test_pair(self):
        stats = aggregate([row(otc=4.0), row(otc=6.0)])["rfid", 1]
        assert stats["mean_otc"] == 5.0
        assert stats["ci95_otc"] == pytest.approx(1.96 * 2 ** 0.5 / 2 ** 0.5)

    def test_all_failed(self):
        stats = aggregate([row(), row()])["rfid", 1]
        assert stats["success_rate"] == 0.0 and stats["mean_otc"] is None and stats["successes"] == 0

    def test_failures_only_count_in_rate(self):
        stats = aggregate([row(otc=3.0), row(), row(otc=5.0), row()])["rfid", 1]
        assert stats["success_rate"] == 0.5 and stats["mean_otc"] == 4.0 and stats["trials"] == 4

    def test_empty(self):
        with pytest.raises(EmptyInput):
            aggregate([])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.sampled_from([1, 2]), st.one_of(st.none(), st.floats(0.1, 50))), min_size=1), st.randoms())
    def test_order_independent(self, cells, rnd):
        rows = [row(value=v, otc=o, runtime=1.5) for v, o in cells]
        shuffled = list(rows)
        rnd.shuffle(shuffled)
        assert aggregate(rows) == aggregate(shuffled)


class TestFiles:
    def test_header_and_round_trip(self, tmp_path):
        rows = [row(otc=1.25, runtime=3.0), row(value=2, sched="heft")]
        path = tmp_path / "results.csv"
        write_results(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert lines[0] == "scheduler,axis,value,seed,n_subtasks,n_vehicles,n_layers,ccr,otc_s,success,sched_runtime_ms"
        back = read_results(path)
        assert [(r.scheduler, r.value, r.otc_s, r.success) for r in back] == [("rfid", 1, 1.25, 1), ("heft", 2, None, 0)]

    def test_summary(self, tmp_path):
        cfg = parse_config(SMALL)
        path = tmp_path / "summary.json"
        write_summary(aggregate([row(otc=2.0), row(value=2, otc=3.0)]), path, cfg)
        doc = json.loads(path.read_text())
        assert doc["axis"] == "n_subtasks" and doc["base_seed"] == 0
        assert doc["results"]["rfid"]["2"]["mean_otc"] == 3.0


def test_axes():
    assert AXES == ("n_subtasks", "n_vehicles", "n_layers", "ccr")
