import numpy as np
import pytest

from csv_schema import ANCHORS, PANEL, read_strict
from data.anchors import SURVEY_YEARS, AnchorTable, load_anchors
from data.normalize import NormStats, compute_stats, denormalize, denormalize_std, normalize
from data.panel import ANCHOR_MONTHS, MONTHS, Panel, resolve_district, synthesize
from data.persist import read_panel, write_panel
from model.dims import INDICATOR_NAMES
from utility.errors import VNValidationError, VNValueError


def _rewrite(source, target, edit):
    lines = source.read_text(encoding="utf-8").splitlines()
    target.write_text("\n".join(edit(lines)) + "\n", encoding="utf-8")
    return target


def _two_district_anchors():
    values = np.empty((2, len(INDICATOR_NAMES), len(SURVEY_YEARS)))
    values[..., 0] = 20.0
    values[..., 1] = 44.0
    values[..., 2] = 59.0
    values[1] += np.arange(len(INDICATOR_NAMES))[:, None]
    return AnchorTable(["Puri", "Khordha"], values)


class TestAnchors:
    def test_fixture_loads(self, anchors_path):
        table = load_anchors(anchors_path)
        assert table.record_count == 540
        assert table.district_count == 30
        assert table.districts[0] == "Angul"
        assert table.values[0, 0].tolist() == [22.0, 30.0, 35.0]
        rows = read_strict(anchors_path, ANCHORS)
        assert len(rows) == 540

    def test_records_follow_file_order(self, anchors_path):
        table = load_anchors(anchors_path)
        first = table.records()[0]
        assert first == ("Angul", 0, 0, 2007, 22.0)

    def test_out_of_range_value_names_the_row(self, anchors_path, tmp_path):
        def edit(lines):
            lines[3] = "Angul,0,0,2020,101"
            return lines

        bad = _rewrite(anchors_path, tmp_path / "bad.csv", edit)
        with pytest.raises(VNValidationError) as info:
            load_anchors(bad)
        assert info.value.row == 4
        assert "101" in str(info.value)

    def test_duplicate_record_names_the_row(self, anchors_path, tmp_path):
        bad = _rewrite(anchors_path, tmp_path / "dup.csv", lambda lines: lines + [lines[1]])
        with pytest.raises(VNValidationError) as info:
            load_anchors(bad)
        assert info.value.row == 542
        assert "duplicate" in str(info.value)

    def test_missing_record_is_listed(self, anchors_path, tmp_path):
        bad = _rewrite(anchors_path, tmp_path / "gap.csv", lambda lines: lines[:2] + lines[3:])
        with pytest.raises(VNValidationError) as info:
            load_anchors(bad)
        assert "(Angul, electricity, 2015)" in str(info.value)

    def test_bad_header(self, anchors_path, tmp_path):
        def edit(lines):
            lines[0] = "district,id,indicator_id,year,value"
            return lines

        bad = _rewrite(anchors_path, tmp_path / "header.csv", edit)
        with pytest.raises(VNValidationError) as info:
            load_anchors(bad)
        assert info.value.row == 1

    def test_unknown_year(self, anchors_path, tmp_path):
        def edit(lines):
            lines[1] = "Angul,0,0,2008,22.0"
            return lines

        with pytest.raises(VNValidationError):
            load_anchors(_rewrite(anchors_path, tmp_path / "year.csv", edit))

    def test_missing_file(self, tmp_path):
        with pytest.raises(VNValidationError):
            load_anchors(tmp_path / "nope.csv")


class TestSynthesis:
    def test_anchors_are_exact(self, anchors_path):
        table = load_anchors(anchors_path)
        panel = synthesize(table, sigma=1.5, seed=0)
        assert panel.values.shape == (30, MONTHS, 6)
        for slot, month in enumerate(ANCHOR_MONTHS):
            assert np.array_equal(panel.values[:, month, :], table.values[:, :, slot])

    def test_zero_sigma_is_piecewise_linear(self):
        table = _two_district_anchors()
        panel = synthesize(table, sigma=0.0, seed=5)
        series = panel.values[0, :, 0]
        assert np.allclose(series[:97], np.linspace(20.0, 44.0, 97))
        assert np.allclose(series[96:157], np.linspace(44.0, 59.0, 61))
        assert np.all(series[156:] == 59.0)
        assert panel.clip_count == 0

    def test_deterministic_regardless_of_workers(self):
        table = _two_district_anchors()
        a = synthesize(table, sigma=2.0, seed=9, max_workers=1)
        b = synthesize(table, sigma=2.0, seed=9, max_workers=8)
        assert np.array_equal(a.values, b.values)
        assert a.panel_hash() == b.panel_hash()

    def test_seed_changes_the_panel(self):
        table = _two_district_anchors()
        a = synthesize(table, sigma=1.5, seed=1)
        b = synthesize(table, sigma=1.5, seed=2)
        assert a.panel_hash() != b.panel_hash()

    def test_clipping_is_rare_and_bounded(self, anchors_path):
        panel = synthesize(load_anchors(anchors_path), seed=3)
        assert np.all((panel.values >= 0.0) & (panel.values <= 100.0))
        assert panel.clip_count / panel.values.size < 0.01

    def test_clipping_is_counted(self):
        values = np.full((1, len(INDICATOR_NAMES), len(SURVEY_YEARS)), 99.5)
        panel = synthesize(AnchorTable(["Boudh"], values), sigma=5.0, seed=0)
        assert panel.clip_count > 0
        assert panel.values.max() <= 100.0

    def test_rejects_negative_sigma(self):
        with pytest.raises(VNValueError):
            synthesize(_two_district_anchors(), sigma=-1.0)


class TestResolveDistrict:
    def test_name_is_case_insensitive(self):
        assert resolve_district(["Puri", "Khordha"], "khordha") == 1

    def test_index(self):
        assert resolve_district(["Puri", "Khordha"], "0") == 0
        assert resolve_district(["Puri", "Khordha"], 1) == 1

    def test_unknown_lists_valid_names(self):
        with pytest.raises(VNValueError) as info:
            resolve_district(["Puri", "Khordha"], "Atlantis")
        assert "Puri" in str(info.value) and "Khordha" in str(info.value)


class TestNormalize:
    def test_zero_mean_unit_std(self):
        values = np.random.default_rng(0).uniform(10, 90, (4, 30, 6))
        z, stats = normalize(values)
        flat = z.reshape(-1, 6)
        assert np.allclose(flat.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(flat.std(axis=0), 1.0)
        assert np.allclose(denormalize(z, stats), values)

    def test_stored_stats_are_reused(self):
        stats = NormStats((10.0,) * 6, (2.0,) * 6)
        z, same = normalize(np.full((1, 2, 6), 14.0), stats)
        assert same is stats
        assert np.all(z == 2.0)
        assert np.all(denormalize_std(np.ones(6), stats) == 2.0)

    def test_constant_indicator_is_named(self):
        values = np.random.default_rng(1).uniform(0, 1, (2, 10, 6))
        values[..., 3] = 42.0
        with pytest.raises(VNValidationError) as info:
            compute_stats(values)
        assert "piped_water" in str(info.value)

    def test_stats_round_trip(self):
        stats = NormStats((1.5, 2.5), (0.1, 0.2))
        assert NormStats.from_dict(stats.to_dict()) == stats


class TestPersist:
    def test_round_trip_preserves_values_and_hash(self, tmp_path):
        panel = synthesize(_two_district_anchors(), sigma=1.5, seed=4)
        _, stats = normalize(panel.values)
        csv_path, sidecar_path = write_panel(panel, stats, tmp_path)
        assert sidecar_path.name == "panel.json"
        rows = read_strict(csv_path, PANEL)
        assert len(rows) == 2 * MONTHS * 6

        restored, restored_stats = read_panel(tmp_path)
        assert np.array_equal(restored.values, panel.values)
        assert restored.panel_hash() == panel.panel_hash()
        assert restored.districts == ["Puri", "Khordha"]
        assert restored_stats == stats

    def test_tampered_value_is_detected(self, tmp_path):
        panel = synthesize(_two_district_anchors(), sigma=1.5, seed=4)
        _, stats = normalize(panel.values)
        csv_path, _ = write_panel(panel, stats, tmp_path)
        lines = csv_path.read_text(encoding="utf-8").splitlines()
        lines[5] = "0,1,4,12.5"
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(VNValidationError):
            read_panel(csv_path)

    def test_missing_sidecar(self, tmp_path):
        panel = Panel(np.ones((1, MONTHS, 6)), ["Puri"])
        csv_path, sidecar_path = write_panel(panel, NormStats((0.0,) * 6, (1.0,) * 6), tmp_path)
        sidecar_path.unlink()
        with pytest.raises(VNValidationError):
            read_panel(csv_path)
