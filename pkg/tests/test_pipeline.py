"""
Test Suite for settings, the analysis pipeline and the command line

Testing Strategy:
1. Settings layering and validation
2. Pipeline runs on small trials (audit, progress, condition checks)
3. CLI subcommands end to end: reports, figure data, exit codes
4. Every JSON report is checked against the published schema

Run tests with: pytest tests/ -v
"""

import json
from pathlib import Path

import pandas as pd
import pytest
from jsonschema import Draft202012Validator
from openpyxl import load_workbook

from cli import main
from config.settings import Settings
from generators.report_generator import ReportGenerator
from generators.trial_simulator import planted_signal_config, simulate_trial
from models.errors import ConfigError, DataError, ReportError
from models.inference import EstimatorKind, PriorKind, SearchMode
from parsers.trial_parser import load_dataset, write_dataset
from pipeline import AnalysisPipeline
from utils.helpers import AuditTrail, EvaluationCache, FileValidator, format_estimate


def schema_validator() -> Draft202012Validator:
    return Draft202012Validator(json.loads(Path(Settings().schema_path).read_text(encoding="utf-8")))


def read_report(path: Path) -> dict:
    payload = json.loads(path.read_text(encoding="utf-8"))
    schema_validator().validate(payload)
    return payload


@pytest.fixture
def signal_files(tmp_path):
    """k=3 planted-signal trial as CSV plus target JSON"""
    dataset = simulate_trial(planted_signal_config(n=150, k=3, seed=8))
    csv_path = write_dataset(dataset, tmp_path / "signal.csv", tmp_path / "signal_target.json")
    return csv_path, tmp_path / "signal_target.json"


# ============================================================================
# Settings Tests
# ============================================================================

class TestSettings:
    """Tests for layered configuration"""

    def test_defaults_are_valid(self):
        settings = Settings()
        assert settings.validate() == []
        assert settings.prior_kind == PriorKind.UNIFORM
        assert settings.search_mode == SearchMode.ENUMERATE
        assert settings.estimator_kind == EstimatorKind.POSTERIOR_MEAN

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            Settings().apply({'search': {'bogus': 1}})

    def test_none_values_are_skipped(self):
        settings = Settings()
        settings.apply({'search': {'seed': 5}})
        settings.apply({'search': {'seed': None}})
        assert settings.search.seed == 5

    def test_mh_needs_iterations_above_burn_in(self):
        settings = Settings()
        settings.apply({'search': {'mode': 'mh', 'iterations': 10, 'burn_in': 20}})
        assert any("burn-in" in issue for issue in settings.validate())
        with pytest.raises(ConfigError) as excinfo:
            settings.require_valid()
        assert excinfo.value.exit_code == 2

    def test_default_burn_in_fraction(self):
        settings = Settings()
        settings.apply({'search': {'iterations': 5000}})
        assert settings.search.resolved_burn_in() == 500

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("PCRS_SEED", "17")
        monkeypatch.setenv("PCRS_EXHAUSTIVE_MAX_K", "9")
        settings = Settings.load()
        assert settings.search.seed == 17
        assert settings.search.exhaustive_max_k == 9

    def test_bad_environment_value(self, monkeypatch):
        monkeypatch.setenv("PCRS_SEED", "abc")
        with pytest.raises(ConfigError):
            Settings.load()

    def test_config_file_and_overrides(self, tmp_path):
        path = tmp_path / "analysis.json"
        path.write_text(json.dumps({'search': {'prior': 'chen-chen', 'seed': 3}}))
        assert Settings.load(config_path=str(path)).prior_kind == PriorKind.CHEN_CHEN
        overridden = Settings.load(config_path=str(path), overrides={'search': {'prior': 'uniform'}})
        assert overridden.prior_kind == PriorKind.UNIFORM
        assert overridden.search.seed == 3

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError):
            Settings.load(config_path=str(tmp_path / "absent.json"))

    def test_invalid_enum_values(self):
        settings = Settings()
        settings.apply({'search': {'prior': 'flat'}, 'report': {'estimator': 'median'}})
        assert len(settings.validate()) == 2

    def test_from_string(self):
        assert PriorKind.from_string("chen-chen") == PriorKind.CHEN_CHEN
        assert EstimatorKind.from_string("Posterior-Mean") == EstimatorKind.POSTERIOR_MEAN
        with pytest.raises(ValueError):
            SearchMode.from_string("gibbs")

    def test_echoed_parameters(self):
        params = Settings().to_dict()
        assert params['prior'] == "uniform"
        assert params['burn_in'] == 5000
        assert set(params) >= {'search', 'iterations', 'chains', 'seed', 'estimator', 'top_m'}


# ============================================================================
# Pipeline Tests
# ============================================================================

class TestAnalysisPipeline:
    """Tests for the staged pipeline"""

    def test_toy_run(self, hand_csv):
        stages = []
        pipeline = AnalysisPipeline(Settings(), progress_callback=lambda p: stages.append(p.stage))
        report = pipeline.run(hand_csv, target="1,0")
        assert len(report.rows) == 4
        assert sum(row.posterior for row in report.rows) == pytest.approx(1.0)
        assert report.best.model.positions() == [1, 2]
        assert report.log_normalizer is not None
        assert pipeline.audit.actions() == ["LOADED", "SEARCHED", "ESTIMATED"]
        assert stages[0] == "Loading"
        assert "Analyzing" in stages

    def test_condition_checks(self, hand_csv):
        report = AnalysisPipeline(Settings()).run(hand_csv, target="1,0")
        fields = {issue.field for issue in report.issues}
        assert "a0" in fields
        assert not report.has_errors

    def test_target_required(self, hand_csv, tmp_path):
        pipeline = AnalysisPipeline(Settings())
        with pytest.raises(DataError):
            pipeline.load(hand_csv)
        with pytest.raises(DataError):
            pipeline.load(hand_csv, target="1,0", targets_path=tmp_path / "targets.json")

    def test_invalid_settings_rejected_up_front(self):
        settings = Settings()
        settings.apply({'report': {'top_m': 0}})
        with pytest.raises(ConfigError):
            AnalysisPipeline(settings)

    def test_mh_report(self, hand_csv):
        settings = Settings()
        settings.apply({'search': {'mode': 'mh', 'iterations': 2000, 'seed': 4}})
        report = AnalysisPipeline(settings).run(hand_csv, target="1,0")
        assert report.source == "mcmc"
        assert report.log_normalizer is None
        assert report.sample_size == 1800

    def test_export_returns_text(self, hand_csv):
        pipeline = AnalysisPipeline(Settings())
        report = pipeline.run(hand_csv, target="1,0")
        payload = json.loads(pipeline.export(report))
        schema_validator().validate(payload)
        assert payload['best_model']['model'] == [1, 2]
        assert "EXPORTED" not in pipeline.audit.actions()

    def test_explore_covers_support(self, hand_csv):
        settings = Settings()
        settings.apply({'search': {'prior': 'chen_chen'}})
        pipeline = AnalysisPipeline(settings)
        dataset = pipeline.load(hand_csv, target="1,0")[0]
        assert len(pipeline.explore(dataset)) == 3

    def test_schema_rejects_malformed_report(self):
        with pytest.raises(ReportError):
            ReportGenerator(Settings()).validate({'schema_version': "1.0.0"})


# ============================================================================
# CLI Tests
# ============================================================================

class TestCommandLine:
    """End-to-end subcommands"""

    def test_simulate(self, tmp_path):
        out, target = tmp_path / "sim.csv", tmp_path / "sim_target.json"
        code = main(["simulate", "--preset", "signal", "--n", "120", "--seed", "2",
                     "--out", str(out), "--target-out", str(target)])
        assert code == 0
        dataset = load_dataset(out, target=str(target))
        assert dataset.n == 120
        assert dataset.k == 6

    def test_simulate_from_config(self, tmp_path):
        config = tmp_path / "generator.json"
        config.write_text(json.dumps({
            'n': 40, 'covariate_cardinalities': [2, 3], 'desire_model': 0.4,
            'response_model': {'baseline': 0.3, 'treatment_effect': 0.2},
            'target': {'covariates': [1, 2]},
        }))
        out = tmp_path / "sim.csv"
        assert main(["simulate", "--config", str(config), "--out", str(out)]) == 0
        assert load_dataset(out, target="1,2").n == 40

    def test_analyze_toy(self, hand_csv, tmp_path):
        out = tmp_path / "report.json"
        assert main(["analyze", "--data", str(hand_csv), "--target", "1,0", "--out", str(out)]) == 0
        payload = read_report(out)
        assert len(payload['models']) == 4
        assert sum(row['posterior'] for row in payload['models']) == pytest.approx(1.0)
        assert payload['search']['source'] == "exhaustive"
        assert payload['best_model']['characteristics'] == ["H1", "H2"]

    def test_rows_limited_by_top_and_support(self, hand_csv, tmp_path):
        out = tmp_path / "report.json"
        main(["analyze", "--data", str(hand_csv), "--target", "1,0", "--top", "2", "--out", str(out)])
        assert len(read_report(out)['models']) == 2
        main(["analyze", "--data", str(hand_csv), "--target", "1,0", "--prior", "chen-chen",
              "--out", str(out)])
        payload = read_report(out)
        assert len(payload['models']) == 3
        assert payload['parameters']['prior'] == "chen_chen"

    def test_undefined_values_are_null(self, hand_csv, tmp_path):
        out = tmp_path / "report.json"
        main(["analyze", "--data", str(hand_csv), "--target", "1,0", "--out", str(out)])
        best = read_report(out)['models'][0]
        assert best['model'] == [1, 2]
        assert best['untreated_e_ratio'] is None

    @pytest.mark.parametrize("command", [
        ["enumerate"],
        ["sample", "--iterations", "3000", "--chains", "2"],
    ])
    def test_byte_identical_reruns(self, signal_files, tmp_path, command):
        csv_path, target = signal_files
        outputs = []
        for name in ("first.json", "second.json"):
            out = tmp_path / name
            code = main(command + ["--data", str(csv_path), "--target", str(target),
                                   "--seed", "13", "--out", str(out)])
            assert code == 0
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        read_report(tmp_path / "first.json")

    def test_report_to_stdout(self, hand_csv, capsys):
        assert main(["enumerate", "--data", str(hand_csv), "--target", "1,0"]) == 0
        payload = json.loads(capsys.readouterr().out)
        schema_validator().validate(payload)

    def test_batch_targets(self, signal_files, tmp_path):
        csv_path, _ = signal_files
        targets = tmp_path / "targets.json"
        targets.write_text(json.dumps([
            {'id': 'ann', 'covariates': [1, 0, 0]},
            {'id': 'bob', 'covariates': [0, 0, 0], 'desire': 0},
        ]))
        out = tmp_path / "batch.json"
        assert main(["analyze", "--data", str(csv_path), "--targets", str(targets), "--out", str(out)]) == 0
        payload = read_report(out)
        assert [t['target']['id'] for t in payload['targets']] == ["ann", "bob"]
        assert payload['rr_interval']['total'] == 2
        assert [row['target'] for row in payload['summary']] == ["ann", "bob"]

    def test_workbook(self, hand_csv, tmp_path):
        out, xlsx = tmp_path / "report.json", tmp_path / "report.xlsx"
        assert main(["analyze", "--data", str(hand_csv), "--target", "1,0",
                     "--out", str(out), "--xlsx", str(xlsx)]) == 0
        workbook = load_workbook(xlsx)
        assert workbook.sheetnames == ["Models", "Best Model", "Audit"]
        assert workbook["Models"].cell(row=1, column=1).value == "Target"
        assert workbook["Models"].max_row == 5

    def test_student_preset_structure(self, tmp_path):
        data, target = tmp_path / "students.csv", tmp_path / "student.json"
        main(["simulate", "--preset", "students", "--out", str(data), "--target-out", str(target)])
        out = tmp_path / "report.json"
        code = main(["sample", "--data", str(data), "--target", str(target), "--prior", "chen-chen",
                     "--iterations", "3000", "--out", str(out)])
        assert code == 0
        payload = read_report(out)
        assert payload['dataset']['k'] == 14
        assert set(payload['best_model']) >= {'characteristics', 'rr'}
        assert len(payload['best_model']['characteristics']) <= 7


class TestFigures:
    """Figure data emitted by the CLI"""

    def test_hypergeom_grid(self, tmp_path):
        out = tmp_path / "grid.csv"
        assert main(["figure", "hypergeom", "10", "10", "--out", str(out)]) == 0
        grid = pd.read_csv(out, index_col=0)
        assert grid.shape == (11, 11)
        values = grid.to_numpy()
        assert values[5, 5] == max(values[x, 10 - x] for x in range(11))
        row, col = divmod(int(values.argmax()), 11)
        assert row == col

    def test_hypergeom_one_empty_stratum(self, tmp_path):
        out = tmp_path / "grid.csv"
        main(["figure", "hypergeom", "0", "5", "--out", str(out)])
        grid = pd.read_csv(out, index_col=0)
        assert grid.shape == (1, 6)
        assert grid.to_numpy() == pytest.approx(1 / 6)

    def test_diagnostics_rows(self, signal_files, tmp_path):
        csv_path, target = signal_files
        out = tmp_path / "diagnostics.csv"
        assert main(["figure", "diagnostics", "--data", str(csv_path), "--target", str(target),
                     "--out", str(out)]) == 0
        frame = pd.read_csv(out)
        assert len(frame) == 8
        assert frame['best'].sum() == 1
        assert frame.loc[frame['best'] == 1, 'posterior'].iloc[0] == frame['posterior'].max()

    def test_diagnostics_undefined_field_is_empty(self, hand_csv, tmp_path):
        out = tmp_path / "diagnostics.csv"
        main(["figure", "diagnostics", "--data", str(hand_csv), "--target", "1,0", "--out", str(out)])
        frame = pd.read_csv(out, dtype=str, keep_default_na=False)
        full = frame[frame['model'] == "{1,2}"]
        assert len(full) == 1
        assert full['untreated_e_ratio'].iloc[0] == ""

    def test_diagnostics_json(self, hand_csv, tmp_path):
        out = tmp_path / "diagnostics.json"
        main(["figure", "diagnostics", "--data", str(hand_csv), "--target", "1,0", "--out", str(out)])
        records = json.loads(out.read_text())
        assert len(records) == 4
        assert [r['best'] for r in records].count(True) == 1


class TestExitCodes:
    """Module-attributed failures map to distinct exit codes"""

    def test_missing_data_file(self, tmp_path, capsys):
        code = main(["analyze", "--data", str(tmp_path / "absent.csv"), "--target", "1,0"])
        assert code == 3
        assert "[dataset]" in capsys.readouterr().err

    def test_bad_row(self, write_csv):
        path = write_csv("id,T,E,R,H1\na,1,1,1,0\nb,3,0,1,1\n")
        assert main(["analyze", "--data", str(path), "--target", "1"]) == 3

    def test_burn_in_not_below_iterations(self, hand_csv):
        code = main(["sample", "--data", str(hand_csv), "--target", "1,0",
                     "--iterations", "10", "--burn-in", "20"])
        assert code == 2

    def test_exhaustive_cap(self, signal_files, monkeypatch, capsys):
        monkeypatch.setenv("PCRS_EXHAUSTIVE_MAX_K", "2")
        csv_path, target = signal_files
        assert main(["enumerate", "--data", str(csv_path), "--target", str(target)]) == 4
        assert "--search mh" in capsys.readouterr().err

    def test_cap_above_mask_width(self, make_dataset, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("PCRS_EXHAUSTIVE_MAX_K", "100")
        target = (0,) * 63
        dataset = make_dataset([(1, 1, 1, target), (0, 0, 0, (1,) * 63)], target)
        csv_path = write_dataset(dataset, tmp_path / "wide.csv", tmp_path / "wide_target.json")
        code = main(["enumerate", "--data", str(csv_path), "--target", str(tmp_path / "wide_target.json")])
        assert code == 4
        assert "exhaustive cap of 62" in capsys.readouterr().err

    def test_diagnostics_needs_out(self, hand_csv):
        assert main(["figure", "diagnostics", "--data", str(hand_csv), "--target", "1,0"]) == 2

    def test_unknown_choice(self, hand_csv):
        with pytest.raises(SystemExit) as excinfo:
            main(["analyze", "--data", str(hand_csv), "--target", "1,0", "--prior", "flat"])
        assert excinfo.value.code == 2


# ============================================================================
# Utility Tests
# ============================================================================

class TestHelpers:
    """Tests for cache, audit trail and file validation"""

    def test_cache_counts_hits(self):
        cache = EvaluationCache()
        calls = []

        def compute():
            calls.append(1)
            return 2.5

        assert cache.get_or_compute(b"sig", compute) == 2.5
        assert cache.get_or_compute(b"sig", compute) == 2.5
        assert len(calls) == 1
        stats = cache.get_stats()
        assert (stats['entries'], stats['hits'], stats['misses']) == (1, 1, 1)
        assert stats['hit_rate'] == pytest.approx(0.5)
        cache.clear()
        assert len(cache) == 0

    def test_audit_trail(self):
        audit = AuditTrail()
        audit.log("LOADED", "trial.csv", "n=10", "DATA")
        frame = audit.to_dataframe()
        assert list(frame.columns) == ['timestamp', 'action', 'subject', 'detail', 'source']
        assert frame.iloc[0]['action'] == "LOADED"
        audit.clear()
        assert audit.actions() == []

    def test_file_validator(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert FileValidator.validate(empty, 'csv') == (False, "File is empty")
        assert FileValidator.validate(empty, 'csv', allow_empty=True) == (True, "")
        is_valid, message = FileValidator.validate(empty, 'json')
        assert not is_valid
        assert ".json" in message
        assert not FileValidator.validate(tmp_path / "absent.csv", 'csv')[0]

    def test_format_estimate(self):
        assert format_estimate(None) == "undefined"
        assert format_estimate(0.0) == "0.000"
        assert format_estimate(2.0, 2) == "2.00"


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
