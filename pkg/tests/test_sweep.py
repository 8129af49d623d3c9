import pytest

from advlab.attacks import AttackSpec
from advlab.core import ParameterError
from advlab.data import blob_dataset
from advlab.sweep import (CSV_COLUMNS, InsufficientDataError, SweepSpec,
                          attach_gaps, correlate, least_squares_slope,
                          read_csv, run_sweep, slopes_by_lambda,
                          slopes_by_width, write_csv)


def tiny_sweep_rows():
    data = blob_dataset(0, 60, 30, 4, 3, 0.15)
    spec = SweepSpec(widths=(4, 8), lambdas=(0.5,), seeds=(0, 1),
                     epochs_list=(2,),
                     attack=AttackSpec(eps=0.05, alpha=0.02, k=2),
                     batch_size=32)
    return run_sweep(spec, data)


@pytest.fixture(scope="module")
def sweep_rows():
    return tiny_sweep_rows()


class TestSweepSpec:
    def test_empty_axis_rejected(self):
        with pytest.raises(ParameterError):
            SweepSpec(widths=(), lambdas=(0.5,), seeds=(0,), epochs_list=(1,))

    def test_duplicates_warn_and_dedupe(self):
        with pytest.warns(UserWarning):
            spec = SweepSpec(widths=(4, 4, 8), lambdas=(0.5,), seeds=(0,),
                             epochs_list=(1,))
        assert spec.widths == (4, 8)

    def test_lambda_range(self):
        with pytest.raises(ParameterError):
            SweepSpec(widths=(4,), lambdas=(1.5,), seeds=(0,), epochs_list=(1,))


class TestRunSweep:
    def test_includes_lambda_zero_family(self, sweep_rows):
        lambdas = {r["lambda"] for r in sweep_rows}
        assert lambdas == {0.0, 0.5}

    def test_grid_coverage(self, sweep_rows):
        cells = {(r["width"], r["lambda"], r["seed"], r["epoch_budget"])
                 for r in sweep_rows}
        assert len(cells) == 2 * 2 * 2 * 1

    def test_row_schema(self, sweep_rows):
        for r in sweep_rows:
            assert set(r) == set(CSV_COLUMNS)

    def test_gap_attached_to_adversarial_finals(self, sweep_rows):
        finals = [r for r in sweep_rows if r["epoch"] == r["epoch_budget"]]
        for r in finals:
            if r["lambda"] > 0:
                assert r["gap_ce"] is not None
            else:
                assert r["gap_ce"] is None

    def test_parallel_matches_serial(self):
        data = blob_dataset(1, 40, 20, 4, 2, 0.15)
        spec = SweepSpec(widths=(4,), lambdas=(0.5,), seeds=(0, 1),
                         epochs_list=(2,),
                         attack=AttackSpec(eps=0.05, alpha=0.02, k=2),
                         batch_size=20)
        serial = run_sweep(spec, data, jobs=1)
        parallel = run_sweep(spec, data, jobs=2)
        strip = lambda rows: [{k: v for k, v in r.items() if k != "epoch_wall_ms"}
                              for r in rows]
        assert strip(serial) == strip(parallel)


class TestAttachGaps:
    def _row(self, width, lam, seed, budget, epoch, loss):
        r = {c: None for c in CSV_COLUMNS}
        r.update(run_id=f"w{width}_l{lam:g}_s{seed}_e{budget}", width=width,
                 **{"lambda": lam}, seed=seed, epoch_budget=budget, epoch=epoch,
                 clean_test_loss=loss)
        return r

    def test_min_over_seeds(self):
        rows = [self._row(4, 0.0, 0, 2, 2, 0.50),
                self._row(4, 0.0, 1, 2, 2, 0.40),
                self._row(4, 0.5, 0, 2, 2, 0.70),
                self._row(4, 0.5, 1, 2, 2, 0.65)]
        attach_gaps(rows)
        assert rows[2]["gap_ce"] == pytest.approx(0.65 - 0.40)
        assert rows[3]["gap_ce"] == pytest.approx(0.65 - 0.40)
        assert rows[0]["gap_ce"] is None

    def test_only_final_epoch_rows_updated(self):
        rows = [self._row(4, 0.0, 0, 2, 2, 0.50),
                self._row(4, 0.5, 0, 2, 1, 0.90),
                self._row(4, 0.5, 0, 2, 2, 0.70)]
        attach_gaps(rows)
        assert rows[1]["gap_ce"] is None
        assert rows[2]["gap_ce"] == pytest.approx(0.20)

    def test_missing_baseline_family_leaves_none(self):
        rows = [self._row(4, 0.5, 0, 2, 2, 0.70)]
        attach_gaps(rows)
        assert rows[0]["gap_ce"] is None


class TestCsvRoundTrip:
    def test_columns_pinned(self):
        assert CSV_COLUMNS == [
            "run_id", "width", "lambda", "seed", "epoch_budget", "epoch",
            "clean_train_loss", "clean_train_acc", "clean_test_loss",
            "clean_test_acc", "fgsm_acc", "pgd_acc", "gamma_hat",
            "gamma_hat_c", "gamma_hat_m", "gamma_ce", "bound_lower",
            "bound_upper", "gap_ce", "epoch_wall_ms",
        ]

    def test_roundtrip(self, sweep_rows, tmp_path):
        path = tmp_path / "sweep.csv"
        write_csv(sweep_rows, path)
        loaded = read_csv(path)
        assert len(loaded) == len(sweep_rows)
        for orig, back in zip(sweep_rows, loaded):
            assert back["run_id"] == orig["run_id"]
            assert back["width"] == orig["width"]
            for k in ("clean_test_loss", "gamma_hat", "gap_ce", "gamma_ce"):
                if orig[k] is None:
                    assert back[k] is None
                else:
                    assert back[k] == pytest.approx(orig[k], rel=1e-12)

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("run_id,width\nx,4\n")
        with pytest.raises(ParameterError):
            read_csv(path)


class TestCorrelate:
    def _row(self, run_id, budget, epoch, g, gap):
        r = {c: None for c in CSV_COLUMNS}
        r.update(run_id=run_id, epoch_budget=budget, epoch=epoch,
                 gamma_ce=g, gap_ce=gap)
        return r

    def test_exact_positive_correlation(self):
        rows = [self._row(f"r{i}", 5, 5, float(i), 2.0 * i + 1.0)
                for i in range(4)]
        rep = correlate(rows, "early")
        assert rep.pearson_r == pytest.approx(1.0, abs=1e-12)
        assert rep.spearman_rho == pytest.approx(1.0, abs=1e-12)
        assert rep.n_points == 4

    def test_exact_negative_correlation(self):
        rows = [self._row(f"r{i}", 5, 5, float(i), -float(i) ** 3)
                for i in range(5)]
        rep = correlate(rows, "late")
        assert rep.pearson_r < -0.9
        assert rep.spearman_rho == pytest.approx(-1.0, abs=1e-12)

    def test_regime_selects_budget(self):
        rows = ([self._row(f"a{i}", 2, 2, float(i), float(i)) for i in range(3)]
                + [self._row(f"b{i}", 9, 9, float(i), -float(i)) for i in range(3)])
        early = correlate(rows, "early")
        late = correlate(rows, "late")
        assert early.pearson_r == pytest.approx(1.0, abs=1e-12)
        assert late.pearson_r == pytest.approx(-1.0, abs=1e-12)

    def test_undefined_rows_counted_excluded(self):
        rows = [self._row(f"r{i}", 5, 5, float(i), float(i)) for i in range(3)]
        rows.append(self._row("r9", 5, 5, None, 1.0))
        rep = correlate(rows, "early")
        assert rep.n_points == 3 and rep.n_excluded == 1

    def test_too_few_points(self):
        rows = [self._row("r0", 5, 5, 1.0, 1.0), self._row("r1", 5, 5, 2.0, 2.0)]
        with pytest.raises(InsufficientDataError):
            correlate(rows, "early")

    def test_zero_variance(self):
        rows = [self._row(f"r{i}", 5, 5, 1.0, float(i)) for i in range(4)]
        with pytest.raises(InsufficientDataError):
            correlate(rows, "early")

    def test_bad_regime(self):
        with pytest.raises(ParameterError):
            correlate([], "middle")


class TestSlopes:
    def test_least_squares_exact_line(self):
        x = [0.0, 1.0, 2.0, 3.0]
        y = [1.0, 1.6, 2.2, 2.8]
        assert least_squares_slope(x, y) == pytest.approx(0.6, abs=1e-12)

    def test_least_squares_needs_variation(self):
        with pytest.raises(InsufficientDataError):
            least_squares_slope([1.0, 1.0], [0.0, 1.0])
        with pytest.raises(InsufficientDataError):
            least_squares_slope([1.0], [2.0])

    def test_slopes_by_group(self):
        def row(width, lam, c, m):
            r = {col: None for col in CSV_COLUMNS}
            r.update(width=width, **{"lambda": lam}, gamma_hat_c=c, gamma_hat_m=m)
            return r

        rows = [row(4, 0.5, 0.0, 1.0), row(4, 0.5, 1.0, 3.0),
                row(8, 0.5, 0.0, 0.0), row(8, 0.5, 2.0, 1.0),
                row(4, 0.0, 0.0, 99.0)]  # standard family must be ignored
        by_w = slopes_by_width(rows)
        assert by_w[4] == pytest.approx(2.0, abs=1e-12)
        assert by_w[8] == pytest.approx(0.5, abs=1e-12)
        by_l = slopes_by_lambda(rows)
        assert set(by_l) == {0.5}
