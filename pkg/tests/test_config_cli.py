import json

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from wncs.cli import cmd_fig2, cmd_fig3, cmd_solve, main
from wncs.config import reference_defaults, parse_config
from wncs.errors import ConfigError, ConvergenceError
from wncs.smdp import Policy


def base_raw():
    return yaml.safe_load(reference_defaults().dump())


def test_defaults_roundtrip():
    cfg = reference_defaults()
    assert parse_config(yaml.safe_load(cfg.dump())) == cfg


@settings(max_examples=30, deadline=None)
@given(
    a=st.floats(0.2, 2.0),
    p0=st.floats(0.05, 0.95),
    ratio=st.floats(0.05, 0.95),
    N=st.integers(5, 90),
    M=st.integers(1, 5),
    seeds=st.lists(st.integers(0, 10**6), min_size=1, max_size=5),
    eps=st.floats(1e-12, 1e-3),
)
def test_roundtrip_property(a, p0, ratio, N, M, seeds, eps):
    raw = {
        "system": {"A": a, "B": 1, "K": -a, "R": 1, "Q": 1},
        "channel": {"kind": "exponential", "p0": p0, "ratio": ratio},
        "solver": {"N": N, "M": M, "epsilon": eps},
        "sim": {"T": 1000, "warmup": 10, "seeds": seeds},
    }
    cfg = parse_config(raw)
    again = parse_config(yaml.safe_load(cfg.dump()))
    assert again == cfg
    assert again.dump() == cfg.dump()


def test_matrix_and_table_roundtrip():
    raw = {
        "system": {"A": [[1.1, 0.2], [0.0, 0.7]], "B": [[1, 0], [0, 1]], "R": [[1, 0], [0, 1]], "Q": [[1, 0], [0, 1]]},
        "channel": {"kind": "table", "table": [0.9, 0.5, 0.2]},
        "solver": {"N": 20, "M": 3},
        "sim": {"seeds": "0-4"},
    }
    cfg = parse_config(raw)
    assert cfg.system.K == [[-1.1, -0.2], [-0.0, -0.7]]
    assert cfg.sim.seeds == [0, 1, 2, 3, 4]
    assert parse_config(yaml.safe_load(cfg.dump())) == cfg
    assert cfg.smdp_spec().M == 3


@pytest.mark.parametrize("mutate, path", [
    (lambda r: r.pop("channel"), "channel"),
    (lambda r: r["system"].pop("A"), "system.A"),
    (lambda r: r["system"].__setitem__("Q", [[1.0, "x"]]), "system.Q[0][1]"),
    (lambda r: r["channel"].__setitem__("kind", "rayleigh"), "channel.kind"),
    (lambda r: r["channel"].__setitem__("p0", 1.5), "channel"),
    (lambda r: r["solver"].__setitem__("M", 80), "solver.N"),
    (lambda r: r["solver"].__setitem__("tau", 2.0), "solver.tau"),
    (lambda r: r["sim"].__setitem__("warmup", 10**6), "sim.warmup"),
    (lambda r: r["sim"].__setitem__("seeds", [1, 2.5]), "sim.seeds[1]"),
    (lambda r: r["solver"].__setitem__("bogus", 1), "solver.bogus"),
    (lambda r: r["system"].__setitem__("K", 1.0), "system"),
])
def test_config_errors_name_the_field(mutate, path):
    raw = base_raw()
    mutate(raw)
    with pytest.raises(ConfigError) as err:
        parse_config(raw)
    assert err.value.path == path
    assert str(err.value).startswith(path)


def write_cfg(tmp_path, **changes):
    raw = base_raw()
    for block, values in changes.items():
        raw[block].update(values)
    p = tmp_path / "cfg.yaml"
    p.write_text(yaml.safe_dump(raw))
    return str(p)


def test_cli_solve(tmp_path, capsys):
    assert main(["solve", "-o", str(tmp_path)]) == 0
    pol = Policy.from_csv(tmp_path / "policy.csv")
    summary = json.loads((tmp_path / "solve.json").read_text())
    assert pol.N == 70 and summary["N"] == 70 and summary["M"] == 5
    assert summary["gain"] == pytest.approx(15.787745268224747, rel=1e-10)
    assert summary["iterations"] > 0
    assert "gain=" in capsys.readouterr().out


def test_cli_overrides(tmp_path):
    assert main(["solve", "-o", str(tmp_path), "--N", "30", "--M", "4"]) == 0
    summary = json.loads((tmp_path / "solve.json").read_text())
    assert (summary["N"], summary["M"]) == (30, 4)


def test_cli_stability(tmp_path, capsys):
    assert main(["stability", "-o", str(tmp_path)]) == 0
    lines = (tmp_path / "stability.csv").read_text().splitlines()
    assert [ln.split(",")[-1] for ln in lines[1:]] == ["false", "true", "true", "true", "true"]
    assert "stabilizable" in capsys.readouterr().out


def test_cli_missing_channel(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("system: {A: 1.2, B: 1, R: 1, Q: 1}\n")
    assert main(["stability", "-c", str(p)]) == 2
    assert capsys.readouterr().err.strip() == "error[config]: channel: missing block"


def test_cli_unstable_solve(tmp_path, capsys):
    cfg = write_cfg(tmp_path, system={"A": 2.0, "K": -2.0}, channel={"p0": 0.9, "ratio": 0.95},
                    solver={"N": 40, "M": 3})
    assert main(["solve", "-c", cfg, "-o", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert err.startswith("error[convergence]:") and "no stationary policy stabilizes" in err


def test_solve_error_carries_stability_verdict(tmp_path):
    cfg = parse_config(yaml.safe_load(open(write_cfg(
        tmp_path, system={"A": 2.0, "K": -2.0}, channel={"p0": 0.9, "ratio": 0.95}, solver={"N": 40, "M": 3}))))
    with pytest.raises(ConvergenceError) as err:
        cmd_solve(cfg)
    assert "3.6 >= 1" in err.value.diagnostic


def test_cli_evaluate_and_simulate(tmp_path, capsys):
    assert main(["evaluate", "--fixed", "3", "--N", "200", "-o", str(tmp_path)]) == 0
    ev = json.loads(capsys.readouterr().out)
    assert ev["stationary_J"] == pytest.approx(ev["analytic_J"], rel=1e-6)
    assert main(["simulate", "--fixed", "3", "--seeds", "0-3", "-o", str(tmp_path)]) == 0
    capsys.readouterr()
    first = (tmp_path / "sim_seeds.csv").read_text()
    assert first.splitlines()[0] == "seed,mean_cost,slots,diverged,divergence_slot"
    assert len(first.splitlines()) == 5
    assert (tmp_path / "aoi_hist.csv").read_text().startswith("d,count\n3,")
    assert main(["simulate", "--fixed", "3", "--seeds", "0-3", "-o", str(tmp_path)]) == 0
    assert (tmp_path / "sim_seeds.csv").read_text() == first


def test_fig2_single_column_matches_solve():
    cfg = reference_defaults()
    cols, text = cmd_fig2(cfg, N_values=[70])
    res, _ = cmd_solve(cfg)
    rows = text.splitlines()
    assert rows[0] == "d,N=70" and len(rows) == 71
    assert [int(r.split(",")[1]) for r in rows[1:]] == list(res.policy.lengths)


def test_fig2_default_rows(tmp_path):
    assert main(["fig2", "-o", str(tmp_path)]) == 0
    rows = (tmp_path / "fig2.csv").read_text().splitlines()
    assert rows[0] == "d,N=30,N=50,N=70" and len(rows) == 31


def test_fig3_no_mc():
    rows, summary, text = cmd_fig3(reference_defaults(), monte_carlo=False)
    assert rows[0]["status"] == "divergent" and text.splitlines()[1].startswith("fixed,1,inf,inf")
    assert rows[-1]["policy"] == "variable"
    assert summary["saving"] == pytest.approx(1 - summary["variable_J"] / summary["best_fixed_J"])


def test_cli_config_command(capsys):
    assert main(["config", "--seeds", "3,5"]) == 0
    cfg = parse_config(yaml.safe_load(capsys.readouterr().out))
    assert cfg.sim.seeds == [3, 5]
