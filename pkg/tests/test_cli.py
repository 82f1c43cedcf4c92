import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metricdf import io as mio
from metricdf.cli import (
    EXIT_DATA,
    EXIT_OK,
    EXIT_REJECT,
    EXIT_USAGE,
    holm_adjust,
    main,
)

# Table of adjusted values mirroring the published mutual-independence row
HOLM_INPUT = [0.001, 0.241, 0.039, 0.004, 0.001, 0.042, 0.588, 0.846, 0.074, 0.493]
HOLM_EXPECTED = [0.010, 0.964, 0.273, 0.032, 0.010, 0.273, 1.000, 1.000, 0.370, 1.000]


class TestHolm:
    def test_published_row(self):
        adjusted = holm_adjust(HOLM_INPUT)
        assert [round(v, 3) for v in adjusted] == HOLM_EXPECTED

    def test_single_value_unchanged(self):
        assert holm_adjust([0.3]) == [0.3]

    def test_all_ones_capped(self):
        assert holm_adjust([1.0, 1.0, 1.0]) == [1.0, 1.0, 1.0]

    def test_range_validated(self):
        with pytest.raises(ValueError, match="outside"):
            holm_adjust([0.5, 1.5])

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=8),
        st.data(),
    )
    def test_monotone_in_inputs(self, pvals, data):
        idx = data.draw(st.integers(min_value=0, max_value=len(pvals) - 1))
        bumped = list(pvals)
        bumped[idx] = min(1.0, bumped[idx] + data.draw(st.floats(min_value=0.0, max_value=0.5)))
        low = holm_adjust(pvals)
        high = holm_adjust(bumped)
        assert all(h >= l - 1e-12 for l, h in zip(low, high))


def write_separated_fixture(tmp_path, n_per_group=10):
    rng = np.random.default_rng(0)
    g1 = rng.normal(size=(n_per_group, 2))
    g2 = rng.normal(size=(n_per_group, 2)) + 1000.0
    vec_path = tmp_path / "objs.csv"
    mio.write_vectors(vec_path, np.vstack([g1, g2]))
    labels_path = tmp_path / "labels.csv"
    mio.write_labels(labels_path, ["1"] * n_per_group + ["2"] * n_per_group)
    return vec_path, labels_path


class TestDist:
    def test_line_points(self, tmp_path, capsys):
        vec = tmp_path / "pts.csv"
        mio.write_vectors(vec, np.array([[0.0], [1.0], [3.0]]))
        out = tmp_path / "d.csv"
        rc = main(["dist", "--components", str(vec), "--metric", "lp", "--out", str(out)])
        assert rc == EXIT_OK
        d = mio.read_distance_matrix(out)
        assert np.array_equal(d.d, np.array([[0.0, 1, 3], [1, 0, 2], [3, 2, 0]]))

    def test_precomputed_passthrough(self, tmp_path):
        from metricdf.metrics import DistanceMatrix

        src = tmp_path / "in.csv"
        rng = np.random.default_rng(1)
        raw = np.tril(rng.uniform(1, 2, size=(4, 4)), -1)
        mio.write_distance_matrix(src, DistanceMatrix(raw + raw.T))
        out = tmp_path / "out.csv"
        rc = main(["dist", "--components", str(src), "--metric", "precomputed",
                   "--out", str(out)])
        assert rc == EXIT_OK
        assert np.array_equal(mio.read_distance_matrix(out).d, raw + raw.T)

    def test_asymmetric_input_is_data_error(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("0,1\n2,0\n")
        out = tmp_path / "out.csv"
        rc = main(["dist", "--components", str(src), "--metric", "precomputed",
                   "--out", str(out)])
        assert rc == EXIT_DATA
        assert "d[0][1]" in capsys.readouterr().err

    def test_multi_component_suffixes(self, tmp_path):
        vec = tmp_path / "pts.csv"
        mio.write_vectors(vec, np.array([[0.0], [2.0]]))
        rc = main(["dist", "--components", str(vec), str(vec),
                   "--metric", "lp", "--out", str(tmp_path / "d.csv")])
        assert rc == EXIT_OK
        assert (tmp_path / "d_1.csv").exists() and (tmp_path / "d_2.csv").exists()


class TestHomtest:
    def test_separated_fixture_rejects(self, tmp_path, capsys):
        vec, labels = write_separated_fixture(tmp_path)
        out = tmp_path / "res.txt"
        rc = main(["homtest", "--components", str(vec), "--metric", "lp",
                   "--labels", str(labels), "--seed", "7", "--out", str(out)])
        assert rc == EXIT_REJECT
        res = mio.read_test_result(out)
        assert res.statistic == 2.0
        assert res.p_value == 1.0 / 400
        assert res.replications == 399  # default
        assert "decision: reject" in capsys.readouterr().out

    def test_identical_groups_accept(self, tmp_path, capsys):
        vec = tmp_path / "objs.csv"
        pts = np.random.default_rng(3).normal(size=(4, 2))
        mio.write_vectors(vec, np.vstack([pts, pts]))
        labels = tmp_path / "labels.csv"
        mio.write_labels(labels, ["1"] * 4 + ["2"] * 4)
        rc = main(["homtest", "--components", str(vec), "--metric", "lp",
                   "--labels", str(labels), "--permutations", "99"])
        assert rc == EXIT_OK
        assert "p_value: 1\n" in capsys.readouterr().out

    def test_shuffled_labels_match_sorted(self, tmp_path, capsys):
        rng = np.random.default_rng(4)
        g1 = rng.normal(size=(5, 2))
        g2 = rng.normal(size=(5, 2)) + 3.0
        order = rng.permutation(10)
        pooled = np.vstack([g1, g2])[order]
        labels = np.array(["1"] * 5 + ["2"] * 5)[order]
        vec = tmp_path / "objs.csv"
        mio.write_vectors(vec, pooled)
        lab = tmp_path / "labels.csv"
        mio.write_labels(lab, list(labels))
        main(["homtest", "--components", str(vec), "--metric", "lp",
              "--labels", str(lab), "--permutations", "49", "--seed", "2"])
        shuffled_out = capsys.readouterr().out

        vec2 = tmp_path / "objs2.csv"
        mio.write_vectors(vec2, np.vstack([g1, g2]))
        lab2 = tmp_path / "labels2.csv"
        mio.write_labels(lab2, ["1"] * 5 + ["2"] * 5)
        main(["homtest", "--components", str(vec2), "--metric", "lp",
              "--labels", str(lab2), "--permutations", "49", "--seed", "2"])
        assert capsys.readouterr().out == shuffled_out

    def test_combine_flag_collapses_components(self, tmp_path, capsys):
        vec, labels = write_separated_fixture(tmp_path)
        rc = main(["homtest", "--components", str(vec), str(vec), "--metric", "lp",
                   "--labels", str(labels), "--combine", "--p", "2",
                   "--permutations", "99", "--seed", "0"])
        assert rc == EXIT_REJECT
        assert "statistic: 2\n" in capsys.readouterr().out

    def test_label_count_mismatch_is_data_error(self, tmp_path, capsys):
        vec, _ = write_separated_fixture(tmp_path)
        labels = tmp_path / "short.csv"
        mio.write_labels(labels, ["1", "2"])
        rc = main(["homtest", "--components", str(vec), "--metric", "lp",
                   "--labels", str(labels)])
        assert rc == EXIT_DATA


class TestIndtest:
    def test_dependent_components_reject(self, tmp_path):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(30, 2))
        vec = tmp_path / "x.csv"
        mio.write_vectors(vec, x)
        out = tmp_path / "res.txt"
        rc = main(["indtest", "--components", str(vec), str(vec), "--metric", "lp",
                   "--permutations", "199", "--seed", "3", "--out", str(out)])
        assert rc == EXIT_REJECT
        assert mio.read_test_result(out).p_value == 1.0 / 200

    def test_independent_components_usually_accept(self, tmp_path):
        rng = np.random.default_rng(6)
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        mio.write_vectors(a, rng.normal(size=(25, 3)))
        mio.write_vectors(b, rng.normal(size=(25, 3)))
        rc = main(["indtest", "--components", str(a), str(b), "--metric", "lp",
                   "--permutations", "99", "--seed", "4"])
        assert rc == EXIT_OK

    def test_single_component_is_usage_error(self, tmp_path, capsys):
        vec = tmp_path / "a.csv"
        mio.write_vectors(vec, np.random.default_rng(7).normal(size=(5, 2)))
        rc = main(["indtest", "--components", str(vec), "--metric", "lp"])
        assert rc == EXIT_USAGE


class TestPowerAndSimulate:
    def test_power_writes_table_and_figure(self, tmp_path, capsys):
        out = tmp_path / "power.csv"
        rc = main(["power", "--scenario", "spd-hom", "--kappas", "1,64", "--ns", "8",
                   "--runs", "4", "--permutations", "19", "--seed", "1",
                   "--spd-dim", "6", "--out", str(out)])
        assert rc == EXIT_OK
        table = mio.read_power_table(out)
        assert len(table.cells) == 2
        assert all(c.runs == 4 for c in table.cells)
        assert out.with_suffix(".png").exists()
        assert "wall_time_seconds" in capsys.readouterr().out

    def test_power_no_plot(self, tmp_path):
        out = tmp_path / "power.csv"
        rc = main(["power", "--scenario", "spd-hom", "--kappas", "1", "--ns", "8",
                   "--runs", "2", "--permutations", "19", "--seed", "1",
                   "--spd-dim", "6", "--out", str(out), "--no-plot"])
        assert rc == EXIT_OK
        assert not out.with_suffix(".png").exists()

    def test_power_unknown_scenario_usage_error(self, tmp_path):
        rc = main(["power", "--scenario", "nope", "--kappas", "1", "--ns", "8",
                   "--runs", "1", "--out", str(tmp_path / "p.csv")])
        assert rc == EXIT_USAGE

    def test_spd_ind_null_scenario_rarely_rejects(self):
        # kappa = 0 makes Z independent of (X, Y); a light calibration smoke
        from metricdf.cli import run_power_study

        table = run_power_study("spd-ind", [0.0], [20], runs=30, permutations=99,
                                alpha=0.05, seed=12, workers=4, spd_dim=6)
        assert table.cells[0].rate <= 0.2

    def test_simulate_roundtrips_into_homtest(self, tmp_path, capsys):
        prefix = tmp_path / "sim"
        rc = main(["simulate", "--scenario", "spd-hom", "--kappa", "2", "--n", "4",
                   "--seed", "9", "--spd-dim", "5", "--out", str(prefix)])
        assert rc == EXIT_OK
        capsys.readouterr()
        assert (tmp_path / "sim_component1.csv").exists()
        meta = (tmp_path / "sim_meta.txt").read_text()
        assert "scenario: spd-hom" in meta and "base_checksum:" in meta
        rc = main(["homtest", "--components", str(tmp_path / "sim_component1.csv"),
                   "--metric", "cholesky", "--labels", str(tmp_path / "sim_labels.csv"),
                   "--permutations", "19", "--seed", "0"])
        assert rc in (EXIT_OK, EXIT_REJECT)

    def test_simulate_independence_components(self, tmp_path, capsys):
        prefix = tmp_path / "sim"
        rc = main(["simulate", "--scenario", "spd-ind", "--kappa", "0", "--n", "5",
                   "--seed", "2", "--spd-dim", "5", "--out", str(prefix)])
        assert rc == EXIT_OK
        for k in (1, 2, 3):
            assert (tmp_path / f"sim_component{k}.csv").exists()

    def test_simulate_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for prefix in (a, b):
            main(["simulate", "--scenario", "shape-hom", "--kappa", "0.1", "--n", "3",
                  "--seed", "5", "--out", str(prefix)])
        assert (tmp_path / "a_component1.csv").read_text() == \
               (tmp_path / "b_component1.csv").read_text()


class TestCliSurface:
    def test_usage_error_exit_code(self):
        assert main(["homtest"]) == EXIT_USAGE
        assert main(["unknown-command"]) == EXIT_USAGE

    def test_metric_count_mismatch(self, tmp_path):
        vec = tmp_path / "a.csv"
        mio.write_vectors(vec, np.zeros((2, 1)))
        rc = main(["dist", "--components", str(vec), "--metric", "lp", "cholesky",
                   "--out", str(tmp_path / "d.csv")])
        assert rc == EXIT_USAGE

    def test_incompatible_type_metric_pair(self, tmp_path):
        vec = tmp_path / "a.csv"
        mio.write_vectors(vec, np.zeros((2, 1)))
        rc = main(["dist", "--components", str(vec), "--metric", "cholesky",
                   "--types", "vector", "--out", str(tmp_path / "d.csv")])
        assert rc == EXIT_USAGE

    def test_missing_file_is_data_error(self, tmp_path):
        rc = main(["dist", "--components", str(tmp_path / "none.csv"),
                   "--metric", "lp", "--out", str(tmp_path / "d.csv")])
        assert rc == EXIT_DATA

    def test_holm_command(self, tmp_path, capsys):
        rc = main(["holm"] + [str(v) for v in HOLM_INPUT] + ["--out", str(tmp_path / "h.txt")])
        assert rc == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert [round(float(v), 3) for v in lines] == HOLM_EXPECTED
        file_lines = (tmp_path / "h.txt").read_text().strip().splitlines()
        assert file_lines == lines

    def test_holm_from_file(self, tmp_path, capsys):
        src = tmp_path / "p.txt"
        src.write_text("0.02\n0.5,0.03\n")
        rc = main(["holm", "--in", str(src)])
        assert rc == EXIT_OK
        vals = [float(v) for v in capsys.readouterr().out.split()]
        assert vals == holm_adjust([0.02, 0.5, 0.03])

    def test_holm_no_values_usage_error(self):
        assert main(["holm"]) == EXIT_USAGE

    def test_workers_env_var(self, tmp_path, monkeypatch, capsys):
        vec, labels = write_separated_fixture(tmp_path, 4)
        monkeypatch.setenv("METRICDF_WORKERS", "2")
        rc = main(["homtest", "--components", str(vec), "--metric", "lp",
                   "--labels", str(labels), "--permutations", "19", "--seed", "1"])
        assert rc == EXIT_REJECT
        monkeypatch.setenv("METRICDF_WORKERS", "zebra")
        rc = main(["homtest", "--components", str(vec), "--metric", "lp",
                   "--labels", str(labels), "--permutations", "19", "--seed", "1"])
        assert rc == EXIT_USAGE
