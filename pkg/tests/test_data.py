import numpy as np
import pytest

from gridleak.data import (PROPERTY_NAMES, Dataset, HouseholdRecord,
                           PropertyVector, SynthConfig, generate_dataset,
                           load_csv, load_dataset, save_dataset,
                           split_aux_honest)
from gridleak.errors import ConfigError, IngestError


def _props(**overrides):
    base = {n: 0 for n in PROPERTY_NAMES}
    base.update(overrides)
    return PropertyVector(**base)


def _daily_mean_by_label(ds, prop):
    ones, zeros = [], []
    for rec, props in ds.households:
        daily = rec.readings.sum() / (len(rec.readings) / 48)
        (ones if props.get(prop) == 1 else zeros).append(daily)
    return float(np.mean(ones)), float(np.mean(zeros))


class TestSynthetic:
    def test_same_config_is_bit_identical(self):
        cfg = SynthConfig(n_households=6, days=15, seed=42)
        a = generate_dataset(cfg)
        b = generate_dataset(SynthConfig(n_households=6, days=15, seed=42))
        for (ra, pa), (rb, pb) in zip(a.households, b.households):
            assert ra.readings.tobytes() == rb.readings.tobytes()
            assert pa == pb

    def test_different_seed_differs(self):
        a = generate_dataset(SynthConfig(n_households=4, days=14, seed=1))
        b = generate_dataset(SynthConfig(n_households=4, days=14, seed=2))
        assert any(not np.array_equal(ra.readings, rb.readings)
                   for (ra, _), (rb, _) in zip(a.households, b.households))

    def test_shapes_and_grid(self):
        cfg = SynthConfig(n_households=3, days=14, seed=0)
        ds = generate_dataset(cfg)
        assert len(ds) == 3
        for rec, _ in ds.households:
            assert len(rec.readings) == 14 * 48
            assert np.all(rec.readings >= 0)
            ts = rec.timestamps_minutes()
            assert np.all(np.diff(ts) == 30)

    def test_zero_strength_groups_within_two_percent(self):
        cfg = SynthConfig(n_households=500, days=14, seed=2024,
                          signal_strengths={n: 0.0 for n in PROPERTY_NAMES})
        ds = generate_dataset(cfg)
        for prop in PROPERTY_NAMES:
            m1, m0 = _daily_mean_by_label(ds, prop)
            assert abs(m1 - m0) / m0 < 0.02, prop

    def test_living_alone_lowers_mean_by_ten_percent(self):
        strengths = {n: 0.0 for n in PROPERTY_NAMES}
        strengths["alone"] = 1.0
        ds = generate_dataset(SynthConfig(n_households=500, days=14, seed=7,
                                          signal_strengths=strengths))
        m1, m0 = _daily_mean_by_label(ds, "alone")
        assert m1 < m0
        assert (m0 - m1) / m0 >= 0.10

    def test_planted_signals_raise_group_consumption_in_window(self):
        # children raise evening load; compare slot means between groups
        strengths = {n: 0.0 for n in PROPERTY_NAMES}
        strengths["children"] = 1.0
        ds = generate_dataset(SynthConfig(n_households=400, days=14, seed=3,
                                          signal_strengths=strengths))
        evening = slice(34, 42)  # 17:00-21:00
        ones, zeros = [], []
        for rec, props in ds.households:
            per_slot = rec.readings.reshape(-1, 48).mean(axis=0)
            (ones if props.children else zeros).append(per_slot[evening].mean())
        assert np.mean(ones) > np.mean(zeros) * 1.15

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            SynthConfig(n_households=1)
        with pytest.raises(ConfigError):
            SynthConfig(days=5)
        with pytest.raises(ConfigError):
            SynthConfig(signal_strengths={"children": -1.0})
        with pytest.raises(ConfigError):
            SynthConfig(signal_strengths={"bogus": 1.0})

    def test_label_marginals_roughly_match_defaults(self):
        ds = generate_dataset(SynthConfig(n_households=800, days=14, seed=5))
        rates = {p: ds.labels_for(p).mean() for p in PROPERTY_NAMES}
        assert abs(rates["alone"] - 808 / 4232) < 0.05
        assert abs(rates["house_old"] - 2152 / 4229) < 0.05


class TestSplit:
    def _dataset(self, ids):
        rng = np.random.default_rng(0)
        households = [
            (HouseholdRecord(i, rng.uniform(0.1, 1.0, 49 * 2), 0), _props())
            for i in ids
        ]
        return Dataset(households, "synthetic")

    def test_paper_example_order(self):
        aux, honest = split_aux_honest(self._dataset([3, 1, 4, 2, 5]))
        assert aux.meter_ids() == [1, 2, 3, 4]
        assert honest.meter_ids() == [5]

    def test_ten_meters_gives_eight_two(self):
        aux, honest = split_aux_honest(self._dataset(range(1, 11)))
        assert len(aux) == 8 and len(honest) == 2

    def test_too_few_refused(self):
        with pytest.raises(ConfigError):
            split_aux_honest(self._dataset([10, 20]))

    def test_partition_is_input_order_independent(self):
        a1, h1 = split_aux_honest(self._dataset([9, 7, 5, 3, 1, 2, 4]))
        a2, h2 = split_aux_honest(self._dataset([1, 2, 3, 4, 5, 7, 9]))
        assert a1.meter_ids() == a2.meter_ids()
        assert h1.meter_ids() == h2.meter_ids()
        assert set(a1.meter_ids()) | set(h1.meter_ids()) == {1, 2, 3, 4, 5, 7, 9}
        assert set(a1.meter_ids()) & set(h1.meter_ids()) == set()


class TestPersistence:
    def test_roundtrip(self, tmp_path):
        ds = generate_dataset(SynthConfig(n_households=4, days=14, seed=9))
        save_dataset(ds, tmp_path / "ds")
        back = load_dataset(tmp_path / "ds")
        assert back.provenance == "synthetic"
        assert back.meter_ids() == ds.meter_ids()
        for (ra, pa), (rb, pb) in zip(ds.households, back.households):
            assert ra.readings.tobytes() == rb.readings.tobytes()
            assert ra.start_minutes == rb.start_minutes
            assert pa == pb

    def test_files_exist(self, tmp_path):
        ds = generate_dataset(SynthConfig(n_households=2, days=14, seed=9))
        out = save_dataset(ds, tmp_path / "ds")
        for name in ("meters.csv", "labels.csv", "manifest.json"):
            assert (out / name).exists()


def _write_meters(path, rows):
    path.write_text("meter_id,timestamp,kwh\n" + "\n".join(rows) + "\n")


def _write_labels(path, meter_ids):
    lines = ["meter_id," + ",".join(PROPERTY_NAMES)]
    lines += [f"{m}," + ",".join("0" for _ in PROPERTY_NAMES) for m in meter_ids]
    path.write_text("\n".join(lines) + "\n")


def _grid(start_hour, count):
    out = []
    for i in range(count):
        minutes = start_hour * 60 + i * 30
        out.append(f"2023-01-02T{minutes // 60:02d}:{minutes % 60:02d}")
    return out


class TestIngest:
    def test_two_meter_toy_file(self, tmp_path):
        stamps = _grid(0, 6)
        rows = [f"1,{t},{0.5 + 0.01 * i}" for i, t in enumerate(stamps)]
        rows += [f"2,{t},{1.0 + 0.01 * i}" for i, t in enumerate(stamps)]
        _write_meters(tmp_path / "m.csv", rows)
        _write_labels(tmp_path / "l.csv", [1, 2])
        ds = load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=6)
        assert ds.meter_ids() == [1, 2]
        rec, _ = ds.get(1)
        assert np.all(np.diff(rec.timestamps_minutes()) == 30)
        assert rec.readings[0] == 0.5

    def test_unsorted_rows_are_ordered(self, tmp_path):
        stamps = _grid(0, 4)
        rows = [f"1,{stamps[2]},0.3", f"1,{stamps[0]},0.1",
                f"1,{stamps[3]},0.4", f"1,{stamps[1]},0.2"]
        _write_meters(tmp_path / "m.csv", rows)
        _write_labels(tmp_path / "l.csv", [1])
        ds = load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=4)
        rec, _ = ds.get(1)
        assert np.allclose(rec.readings, [0.1, 0.2, 0.3, 0.4])

    def test_unparsable_row_names_row_number(self, tmp_path):
        stamps = _grid(0, 3)
        rows = [f"1,{stamps[0]},0.5", f"1,{stamps[1]},oops", f"1,{stamps[2]},0.5"]
        _write_meters(tmp_path / "m.csv", rows)
        _write_labels(tmp_path / "l.csv", [1])
        with pytest.raises(IngestError, match="row 3"):
            load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=3)

    def test_one_interval_gap_forward_filled(self, tmp_path):
        stamps = _grid(0, 6)
        del stamps[3]  # one missing interval
        rows = [f"1,{t},{0.1 * (i + 1)}" for i, t in enumerate(stamps)]
        _write_meters(tmp_path / "m.csv", rows)
        _write_labels(tmp_path / "l.csv", [1])
        ds = load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=6)
        rec, _ = ds.get(1)
        assert len(rec.readings) == 6
        # slot 3 takes the previous value
        assert rec.readings[3] == rec.readings[2]
        assert np.all(np.diff(rec.timestamps_minutes()) == 30)

    def test_long_gap_keeps_longest_segment(self, tmp_path):
        early = _grid(0, 4)       # 4 readings
        late = _grid(6, 8)        # 8 readings after a 2-hour hole
        rows = [f"1,{t},0.5" for t in early + late]
        _write_meters(tmp_path / "m.csv", rows)
        _write_labels(tmp_path / "l.csv", [1])
        ds = load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=4)
        rec, _ = ds.get(1)
        assert len(rec.readings) == 8
        assert rec.start_minutes % (24 * 60) == 6 * 60

    def test_short_meter_excluded_with_warning(self, tmp_path, caplog):
        rows = [f"1,{t},0.5" for t in _grid(0, 3)]
        rows += [f"2,{t},0.5" for t in _grid(0, 10)]
        _write_meters(tmp_path / "m.csv", rows)
        _write_labels(tmp_path / "l.csv", [1, 2])
        with caplog.at_level("WARNING"):
            ds = load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=10)
        assert ds.meter_ids() == [2]
        assert any("excluded" in r.message for r in caplog.records)

    def test_missing_labels_excluded(self, tmp_path):
        rows = [f"1,{t},0.5" for t in _grid(0, 6)]
        rows += [f"2,{t},0.5" for t in _grid(0, 6)]
        _write_meters(tmp_path / "m.csv", rows)
        _write_labels(tmp_path / "l.csv", [2])
        ds = load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=6)
        assert ds.meter_ids() == [2]

    def test_bad_label_cell_rejects_file(self, tmp_path):
        rows = [f"1,{t},0.5" for t in _grid(0, 6)]
        _write_meters(tmp_path / "m.csv", rows)
        lines = ["meter_id," + ",".join(PROPERTY_NAMES),
                 "1," + ",".join(["0"] * 7 + ["2"])]
        (tmp_path / "l.csv").write_text("\n".join(lines) + "\n")
        with pytest.raises(IngestError, match="row 2"):
            load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=6)

    def test_off_grid_timestamp_rejected(self, tmp_path):
        rows = ["1,2023-01-02T00:00,0.5", "1,2023-01-02T00:17,0.5"]
        _write_meters(tmp_path / "m.csv", rows)
        _write_labels(tmp_path / "l.csv", [1])
        with pytest.raises(IngestError, match="row 3"):
            load_csv(tmp_path / "m.csv", tmp_path / "l.csv", min_readings=2)
