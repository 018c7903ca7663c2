"""Harness plumbing: strict config parsing, CSV precision, snapshots."""

import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rossbylab import primitive as pr
from rossbylab import qh
from rossbylab import spectral as sp
from rossbylab.config import (
    RunConfig,
    apply_overrides,
    parse_config,
    serialize_config,
)
from rossbylab.errors import ConfigError
from rossbylab.records import DiagnosticsRecord
from rossbylab.snapshots import read_csv, read_snapshot, write_csv, write_snapshot


# ---------------------------------------------------------------------------
# config
# ---------------------------------------------------------------------------

def test_empty_config_is_all_defaults():
    cfg = parse_config("")
    assert cfg.n == 128
    assert cfg.epsilon == 0.1
    assert cfg.delta == 0.1
    assert cfg.cfl == 0.5
    assert cfg.dt is None
    assert cfg.horizon == 1.0
    assert "n" in cfg.defaults_applied


def test_power_of_two_rejected_with_line():
    text = "[grid]\n# comment\nn = 100\n"
    with pytest.raises(ConfigError, match="line 3.*power of two"):
        parse_config(text)


def test_unknown_key_rejected_with_line():
    with pytest.raises(ConfigError, match="line 2.*unknown key"):
        parse_config("[grid]\nwibble = 3\n")


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match="line 1.*unknown section"):
        parse_config("[plasma]\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("[grid]\nn = 64\nn = 128\n")


def test_malformed_line_rejected():
    with pytest.raises(ConfigError, match="line 1.*key = value"):
        parse_config("this is not a config\n")


def test_bad_value_rejected_with_line():
    with pytest.raises(ConfigError, match="line 2.*cannot parse"):
        parse_config("[data]\ndelta = banana\n")


def test_eps_list_must_decrease():
    with pytest.raises(ConfigError, match="strictly decreasing"):
        parse_config("[data]\neps_list = 0.1,0.2\n")


def test_parse_sections_and_comments():
    text = """
# full-line comment
[grid]
n = 64            # inline comment
[solver]
cfl = 0.25
dt = none
[data]
seed = 7
[run]
horizon = 2.0
output_times = 0.5,1.0,2.0
"""
    cfg = parse_config(text)
    assert cfg.n == 64
    assert cfg.cfl == 0.25
    assert cfg.dt is None
    assert cfg.seed == 7
    assert cfg.output_times == (0.5, 1.0, 2.0)


def test_serialize_round_trip_defaults():
    cfg = parse_config("")
    again = parse_config(serialize_config(cfg))
    assert again == cfg or _equal_ignoring_defaults(again, cfg)


def _equal_ignoring_defaults(a: RunConfig, b: RunConfig) -> bool:
    fields = [k for k in vars(a) if k != "defaults_applied"]
    return all(getattr(a, k) == getattr(b, k) for k in fields)


@settings(max_examples=40, deadline=None)
@given(
    n=st.sampled_from([8, 16, 32, 64, 128, 256]),
    cfl=st.floats(0.05, 1.0),
    delta=st.floats(0.0, 0.5),
    epsilon=st.floats(0.001, 1.0),
    seed=st.integers(0, 2**31 - 1),
    horizon=st.floats(0.1, 5.0),
)
def test_serialize_parse_property(n, cfl, delta, epsilon, seed, horizon):
    cfg = RunConfig(n=n, cfl=cfl, delta=delta, epsilon=epsilon, seed=seed,
                    horizon=horizon)
    reparsed = parse_config(serialize_config(cfg))
    assert _equal_ignoring_defaults(reparsed, cfg)


def test_overrides_layering():
    cfg = parse_config("[grid]\nn = 64\n")
    out = apply_overrides(cfg, [("seed", "9"), ("delta", "0.2")])
    assert out.n == 64
    assert out.seed == 9
    assert out.delta == 0.2
    with pytest.raises(ConfigError, match="unknown key"):
        apply_overrides(cfg, [("bogus", "1")])


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _sample_records():
    return [
        DiagnosticsRecord(
            t=0.1, energy=1.0 / 3.0, linf_R=0.1, l2_div_u=1e-16,
            besov_b0inf1_omega=0.7, E_qh=0.9, A_eps=0.2,
            gamma_l2=0.3333333333333333, pressure_iters=6, wall_time_ms=12.5,
        ),
        DiagnosticsRecord(
            t=0.2, energy=math.pi, linf_R=0.1, l2_div_u=0.0,
            besov_b0inf1_omega=0.71, E_qh=0.91, A_eps=0.21,
            gamma_l2=1e-300, pressure_iters=7, wall_time_ms=25.0,
        ),
    ]


def test_csv_header_names_every_field(tmp_path):
    path = tmp_path / "d.csv"
    write_csv(_sample_records(), path)
    header, rows = read_csv(path)
    assert header == DiagnosticsRecord.field_names()
    assert len(rows) == 2


def test_csv_17_digit_round_trip(tmp_path):
    path = tmp_path / "d.csv"
    records = _sample_records()
    write_csv(records, path)
    with open(path, newline="") as fh:
        parsed = list(csv.DictReader(fh))
    for rec, row in zip(records, parsed):
        assert float(row["energy"]) == rec.energy
        assert float(row["gamma_l2"]) == rec.gamma_l2
        assert int(row["pressure_iters"]) == rec.pressure_iters


def test_csv_uses_lf_newlines(tmp_path):
    path = tmp_path / "d.csv"
    write_csv(_sample_records(), path)
    blob = path.read_bytes()
    assert b"\r" not in blob
    assert blob.endswith(b"\n")


def test_csv_refuses_empty(tmp_path):
    with pytest.raises(ValueError, match="empty"):
        write_csv([], tmp_path / "d.csv")


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def test_snapshot_round_trip_primitive(tmp_path, grid32):
    state = pr.make_initial_data(grid32, delta=0.1, epsilon=0.1, seed=1)
    path = tmp_path / "s.rsbl"
    write_snapshot(state, path)
    back = read_snapshot(path)
    assert isinstance(back, pr.PrimitiveState)
    assert back.t == state.t
    assert back.epsilon == state.epsilon
    assert np.array_equal(back.a.values, state.a.values)
    assert np.array_equal(back.u.x_comp.values, state.u.x_comp.values)
    assert np.array_equal(back.pi.values, state.pi.values)


def test_snapshot_round_trip_qh(tmp_path, grid32):
    state = qh.make_qh_initial_data(grid32, delta=0.1, seed=2)
    path = tmp_path / "s.rsbl"
    write_snapshot(state, path)
    back = read_snapshot(path)
    assert isinstance(back, qh.QHState)
    assert np.array_equal(back.R.values, state.R.values)


def test_snapshot_truncation_reports_offset(tmp_path, grid32):
    state = qh.make_qh_initial_data(grid32, delta=0.1, seed=3)
    path = tmp_path / "s.rsbl"
    write_snapshot(state, path)
    blob = path.read_bytes()
    (tmp_path / "bad.rsbl").write_bytes(blob[:-100])
    with pytest.raises(ValueError, match=f"offset {len(blob) - 100}"):
        read_snapshot(tmp_path / "bad.rsbl")


def test_snapshot_bad_magic_and_version(tmp_path, grid32):
    state = qh.make_qh_initial_data(grid32, delta=0.1, seed=4)
    path = tmp_path / "s.rsbl"
    write_snapshot(state, path)
    blob = bytearray(path.read_bytes())
    bad = tmp_path / "bad.rsbl"
    bad.write_bytes(b"XXXX" + bytes(blob[4:]))
    with pytest.raises(ValueError, match="magic"):
        read_snapshot(bad)
    blob2 = bytearray(path.read_bytes())
    blob2[4] = 9
    bad.write_bytes(bytes(blob2))
    with pytest.raises(ValueError, match="version"):
        read_snapshot(bad)


def test_snapshot_rejects_nan_fields(tmp_path, grid32):
    state = qh.make_qh_initial_data(grid32, delta=0.1, seed=5)
    state.R.values[3, 3] = np.nan
    path = tmp_path / "s.rsbl"
    write_snapshot(state, path)
    with pytest.raises(ValueError, match="non-finite field"):
        read_snapshot(path)


def test_snapshot_epsilon_slot_rules(tmp_path, grid32):
    # primitive snapshots must carry a finite epsilon; the NaN slot is
    # reserved for limit-system states
    state = pr.make_initial_data(grid32, delta=0.1, epsilon=0.1, seed=6)
    path = tmp_path / "s.rsbl"
    write_snapshot(state, path)
    blob = bytearray(path.read_bytes())
    import struct

    struct.pack_into("<d", blob, 4 + 1 + 4 + 8, float("nan"))
    bad = tmp_path / "bad.rsbl"
    bad.write_bytes(bytes(blob))
    with pytest.raises(ValueError, match="epsilon"):
        read_snapshot(bad)
