"""Benchmark harness tests: payload determinism, timing contracts,
analysis on synthetic samples, and CSV/SVG emission."""

import xml.etree.ElementTree as ET

import numpy as np
import pytest
from scipy import stats as scipy_stats

import sealmail as sm
from sealmail.bench import (
    DEFAULT_REPS,
    IMPL_KERNEL_NATIVE,
    IMPL_KERNEL_PORTABLE,
    IMPL_SCRIPT_BASELINE,
    MIB,
    OP_DECRYPT,
    OP_ENCRYPT,
    REFERENCE,
    BenchSample,
    analyze,
    emit_csv,
    emit_svg,
    gen_payload,
    main,
    parse_csv,
    report_rows,
    run_grid,
    time_op,
)


class TestGenPayload:
    def test_deterministic(self):
        assert gen_payload(16, seed=1) == gen_payload(16, seed=1)

    def test_seeds_differ(self):
        assert gen_payload(MIB, seed=1) != gen_payload(MIB, seed=2)

    def test_exact_length(self):
        assert len(gen_payload(12345, seed=0)) == 12345

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            gen_payload(0, seed=0)

    def test_histogram_roughly_uniform(self):
        """Chi-squared sanity on the byte-value histogram of a large payload."""
        payload = gen_payload(20 * MIB, seed=42)
        counts = np.bincount(np.frombuffer(payload, dtype=np.uint8), minlength=256)
        _, p_value = scipy_stats.chisquare(counts)
        assert p_value > 1e-6, f"byte histogram wildly non-uniform (p={p_value})"


class TestTimeOp:
    def test_exactly_ten_samples(self):
        samples = time_op(IMPL_KERNEL_NATIVE, OP_ENCRYPT, gen_payload(64 * 1024, 0))
        assert len(samples) == DEFAULT_REPS
        assert [s.repetition for s in samples] == list(range(DEFAULT_REPS))

    def test_durations_strictly_positive(self):
        for op in (OP_ENCRYPT, OP_DECRYPT):
            samples = time_op(IMPL_KERNEL_NATIVE, op, gen_payload(64 * 1024, 1), repetitions=3)
            assert all(s.duration_ms > 0 for s in samples)

    def test_portable_impl_unavailable_natively(self):
        with pytest.raises(sm.ImplUnavailable):
            time_op(IMPL_KERNEL_PORTABLE, OP_ENCRYPT, b"x")
        with pytest.raises(sm.ImplUnavailable):
            time_op(IMPL_SCRIPT_BASELINE, OP_ENCRYPT, b"x")

    def test_sample_fields(self):
        (sample, *_) = time_op(IMPL_KERNEL_NATIVE, OP_DECRYPT, gen_payload(1024, 2), repetitions=1)
        assert sample.impl == IMPL_KERNEL_NATIVE
        assert sample.op == OP_DECRYPT
        assert sample.size_bytes == 1024


def synthetic_samples(rate_ms_per_mib=3.0, sizes_mib=(1, 2, 4, 8, 12, 16, 20), impls=(IMPL_KERNEL_NATIVE,), reps=DEFAULT_REPS, jitter=0.0):
    rng = np.random.default_rng(0)
    samples = []
    for impl in impls:

        factor = 4.0 if impl == IMPL_SCRIPT_BASELINE else 1.0
        for size_mib in sizes_mib:
            for op in (OP_ENCRYPT, OP_DECRYPT):
                for rep in range(reps):
                    noise = rng.normal(0, jitter) if jitter else 0.0
                    samples.append(
                        BenchSample(
                            impl=impl,
                            op=op,
                            size_bytes=size_mib * MIB,
                            duration_ms=rate_ms_per_mib * factor * size_mib + noise,
                            repetition=rep,
                        )
                    )
    return samples


class TestAnalyze:
    def test_normalized_base_is_exactly_one(self):
        report = analyze(synthetic_samples())
        assert report.normalized[(IMPL_KERNEL_NATIVE, OP_ENCRYPT, MIB)] == 1.0

    def test_perfectly_linear_synthetic_input(self):
        """duration = 3 * size: R^2 must be 1, normalized(20MiB) must be 20."""
        report = analyze(synthetic_samples(rate_ms_per_mib=3.0))
        fit = report.fits[(IMPL_KERNEL_NATIVE, OP_ENCRYPT)]
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.slope_ms_per_mib == pytest.approx(3.0, rel=1e-9)
        assert report.normalized[(IMPL_KERNEL_NATIVE, OP_ENCRYPT, 20 * MIB)] == pytest.approx(20.0)

    def test_speedup_against_script_baseline(self):
        report = analyze(
            synthetic_samples(impls=(IMPL_KERNEL_NATIVE, IMPL_SCRIPT_BASELINE))
        )
        assert report.speedup[(IMPL_KERNEL_NATIVE, OP_ENCRYPT, MIB)] == pytest.approx(4.0)
        assert report.speedup[(IMPL_SCRIPT_BASELINE, OP_ENCRYPT, MIB)] == pytest.approx(1.0)

    def test_no_speedup_without_baseline(self):
        report = analyze(synthetic_samples())
        assert report.speedup == {}

    def test_missing_size_raises(self):
        samples = synthetic_samples()
        short = [s for s in samples if s.size_bytes != 8 * MIB or s.op != OP_DECRYPT]
        with pytest.raises(sm.IncompleteGrid):
            analyze(short)

    def test_wrong_rep_count_raises(self):
        samples = synthetic_samples()
        with pytest.raises(sm.IncompleteGrid):
            analyze(samples[:-1])

    def test_cv_flagging(self):
        samples = synthetic_samples(reps=DEFAULT_REPS)
        noisy = [
            BenchSample(s.impl, s.op, s.size_bytes, s.duration_ms * (10 if s.repetition == 0 else 1), s.repetition)
            for s in samples
        ]
        report = analyze(noisy)
        assert any(stats.flagged for stats in report.cells.values())

    def test_empty_input(self):
        with pytest.raises(sm.IncompleteGrid):
            analyze([])

    def test_reference_figures_attached(self):
        report = analyze(synthetic_samples())
        assert report.reference.iphone_encrypt_speedup == 13.9
        assert report.reference.pixel_encrypt_speedup == 6.9
        assert report.reference.decrypt_speedup == 5.1
        assert report.reference.iphone_wasm_20mib_ms == 307.2


class TestEmit:
    def test_csv_row_count(self, tmp_path):
        report = analyze(synthetic_samples(impls=(IMPL_KERNEL_NATIVE, IMPL_SCRIPT_BASELINE)))
        path = str(tmp_path / "out.csv")
        emit_csv(report, path)
        rows = parse_csv(path)
        assert len(rows) == 2 * 2 * 7  # impls * ops * sizes

    def test_csv_round_trip(self, tmp_path):
        report = analyze(synthetic_samples())
        path = str(tmp_path / "out.csv")
        emit_csv(report, path)
        for row in parse_csv(path):
            key = (row["impl"], row["op"], row["size_bytes"])
            assert row["mean_ms"] == report.cells[key].mean_ms
            assert row["normalized"] == report.normalized[key]
            assert row["speedup"] is None

    def test_reference_annotations_in_csv(self, tmp_path):
        report = analyze(synthetic_samples())
        path = str(tmp_path / "out.csv")
        emit_csv(report, path)
        text = open(path).read()
        assert str(REFERENCE.iphone_encrypt_speedup) in text
        assert str(REFERENCE.pixel_wasm_20mib_ms) in text

    def test_unwritable_path_raises_io_failure(self, tmp_path):
        report = analyze(synthetic_samples())
        with pytest.raises(sm.IoFailure):
            emit_csv(report, str(tmp_path / "missing-dir" / "out.csv"))

    def test_svg_contains_measured_and_ideal(self, tmp_path):
        report = analyze(synthetic_samples())
        path = str(tmp_path / "out.svg")
        emit_svg(report, path)
        root = ET.parse(path).getroot()
        ns = "{http://www.w3.org/2000/svg}"
        polylines = root.findall(f"{ns}polyline")
        ideal = [el for el in root.findall(f"{ns}line") if el.get("class") == "ideal"]
        assert len(polylines) == 2  # encrypt + decrypt curves
        assert all(el.get("class") == "measured" for el in polylines)
        assert len(ideal) == 1


class TestGridRun:
    """Small real-kernel run; the full grid lives in the acceptance suite."""

    def test_small_grid_end_to_end(self, tmp_path):
        samples = run_grid(sizes_mib=[1, 2], repetitions=3, seed=1)
        assert len(samples) == 2 * 2 * 3
        report = analyze(samples, repetitions=3)
        assert report.sizes == [MIB, 2 * MIB]
        for (impl, op), fit in report.fits.items():
            assert fit.slope_ms_per_mib > 0

    def test_cli(self, tmp_path, capsys):
        out = tmp_path / "results.csv"
        svg = tmp_path / "results.svg"
        status = main(
            ["--sizes", "1,2", "--reps", "3", "--out", str(out), "--svg", str(svg), "--seed", "9"]
        )
        assert status == 0
        assert out.exists() and svg.exists()
        rows = parse_csv(str(out))
        assert len(rows) == 1 * 2 * 2
        captured = capsys.readouterr()
        assert "R^2" in captured.out

    def test_cli_rejects_browser_impls(self, tmp_path):
        status = main(["--sizes", "1", "--reps", "2", "--impl", "script_baseline", "--out", str(tmp_path / "x.csv")])
        assert status == 2
