"""Command-line interface: exit codes, trace files, and report output."""

import numpy as np
import pytest

from nssqp.analysis import fit_linear_rate, positive_prefix, trace_errors
from nssqp.cli import main, parse_config_file
from nssqp.driver import default_config, solve
from nssqp.errors import ConfigError, ContractError
from nssqp.library import build
from nssqp.traceio import PREFIX_COLUMNS, read_trace, trace_columns, write_trace

DC1D_RUN = {}


def dc1d_trace():
    if "trace" not in DC1D_RUN:
        prob = build("dc1d")
        DC1D_RUN["trace"] = solve(prob.spec, prob.x0, default_config(prob.spec)).trace
    return DC1D_RUN["trace"]


def stdout_value(captured, key):
    for line in captured.splitlines():
        if line.startswith(key + ":"):
            return line.split(":", 1)[1].strip()
    raise AssertionError(f"no line {key!r} in output:\n{captured}")


def synthetic_trace(path, x_values):
    # minimal 1-variable trace; only k and x_0 matter to the rate command
    lines = [",".join(trace_columns(1))]
    for k, x in enumerate(x_values):
        lines.append(f"{k},1,1,0,0,0,0,0,0,0,{format(float(x), '.17g')}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_trace_roundtrip_reproduces_doubles(tmp_path):
    trace = dc1d_trace()
    path = tmp_path / "t.csv"
    write_trace(trace, path)
    table = read_trace(path)
    assert table.columns == trace_columns(1)
    assert table.n == 1
    assert table.data.shape == (len(trace), 11)
    for i, rec in enumerate(trace):
        assert table.column("k")[i] == rec.k
        assert table.column("alpha")[i] == rec.alpha
        assert table.column("theta")[i] == rec.theta
        assert table.column("f")[i] == rec.f
        assert table.column("merit")[i] == rec.merit
        assert table.column("step_norm")[i] == rec.step_norm
        assert table.points()[i, 0] == rec.x[0]


def test_trace_write_deterministic_bytes(tmp_path):
    prob = build("recourse2")
    a = solve(prob.spec, prob.x0, default_config(prob.spec)).trace
    b = solve(prob.spec, prob.x0, default_config(prob.spec)).trace
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace(a, pa)
    write_trace(b, pb)
    assert pa.read_bytes() == pb.read_bytes()


def test_trace_write_empty_rejected(tmp_path):
    with pytest.raises(ContractError):
        write_trace([], tmp_path / "e.csv")


def test_trace_read_rejects_malformed(tmp_path):
    path = tmp_path / "bad.csv"

    path.write_text("", encoding="utf-8")
    with pytest.raises(ContractError):
        read_trace(path)

    path.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
    with pytest.raises(ContractError):
        read_trace(path)

    header = ",".join(trace_columns(1))
    path.write_text(header + "\n0,1,1,0,0,0,0,0,0,0\n", encoding="utf-8")
    with pytest.raises(ContractError):
        read_trace(path)  # truncated row

    path.write_text(header + "\n0,1,1,0,0,0,0,0,0,0,oops\n", encoding="utf-8")
    with pytest.raises(ContractError):
        read_trace(path)  # non-numeric field

    path.write_text(",".join(PREFIX_COLUMNS) + "\n", encoding="utf-8")
    with pytest.raises(ContractError):
        read_trace(path)  # no coordinate columns


def test_solve_writes_trace_and_exits_zero(tmp_path, capsys):
    out = tmp_path / "dc1d.csv"
    rc = main(["solve", "dc1d", "--out", str(out)])
    captured = capsys.readouterr().out
    assert rc == 0
    assert stdout_value(captured, "status") == "converged"
    assert float(stdout_value(captured, "f")) == pytest.approx(-0.25, abs=1e-9)
    table = read_trace(out)
    assert table.data.shape[0] >= 2
    assert abs(table.points()[-1, 0] - 0.5) <= 1e-6


def test_solve_unknown_problem_exit_1(capsys):
    rc = main(["solve", "nope"])
    assert rc == 1
    assert "nope" in capsys.readouterr().err


def test_solve_max_iter_exit_2(tmp_path, capsys):
    rc = main(["solve", "dc1d", "--max-iter", "3", "--out", str(tmp_path / "t.csv")])
    captured = capsys.readouterr().out
    assert rc == 2
    assert stdout_value(captured, "status") == "max_iterations"
    assert read_trace(tmp_path / "t.csv").data.shape[0] == 3


def test_solve_cli_byte_identical_runs(tmp_path):
    pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["solve", "recourse2", "--out", str(pa)]) == 0
    assert main(["solve", "recourse2", "--out", str(pb)]) == 0
    assert pa.read_bytes() == pb.read_bytes()


def test_solve_default_out_name(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["solve", "affine-eq"]) == 0
    capsys.readouterr()
    assert (tmp_path / "affine-eq_trace.csv").exists()


def test_solve_x0_override(tmp_path, capsys):
    rc = main(["solve", "dc1d", "--x0=-2", "--out", str(tmp_path / "t.csv")])
    captured = capsys.readouterr().out
    assert rc == 0
    # symmetric start lands on the mirrored minimizer
    assert abs(read_trace(tmp_path / "t.csv").points()[-1, 0] + 0.5) <= 1e-6
    assert float(stdout_value(captured, "f")) == pytest.approx(-0.25, abs=1e-9)


def test_solve_x0_wrong_length_exit_1(capsys):
    rc = main(["solve", "dc1d", "--x0", "1,2"])
    assert rc == 1
    assert "x0" in capsys.readouterr().err


def test_solve_plot_writes_figure(tmp_path, capsys):
    out = tmp_path / "t.csv"
    rc = main(["solve", "dc1d", "--plot", "--out", str(out)])
    capsys.readouterr()
    assert rc == 0
    png = tmp_path / "t.png"
    assert png.exists() and png.stat().st_size > 0


def test_config_file_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# solver settings\n"
        "\n"
        "eps = 1e-6  # loose stop\n"
        "max_iter = 50\n"
        "plot = false\n",
        encoding="utf-8",
    )
    opts = parse_config_file(cfg)
    assert opts == {"eps": 1e-6, "max_iter": 50, "plot": False}

    cfg.write_text("bogus = 1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_config_file(cfg)

    cfg.write_text("eps 1e-6\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_config_file(cfg)

    cfg.write_text("eps = fast\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        parse_config_file(cfg)


def test_config_file_bad_key_exit_1(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("bogus = 1\n", encoding="utf-8")
    rc = main(["solve", "dc1d", "--config", str(cfg)])
    assert rc == 1
    assert "bogus" in capsys.readouterr().err


def test_config_flag_overrides_file(tmp_path, capsys):
    # file caps the run at 3 iterations; the flag must win and let it converge
    cfg = tmp_path / "run.cfg"
    cfg.write_text("problem = dc1d\nmax_iter = 3\n", encoding="utf-8")
    out = tmp_path / "t.csv"
    rc = main(["solve", "--config", str(cfg), "--out", str(out)])
    capsys.readouterr()
    assert rc == 2
    assert read_trace(out).data.shape[0] == 3

    rc = main(["solve", "--config", str(cfg), "--max-iter", "500",
               "--out", str(tmp_path / "u.csv")])
    capsys.readouterr()
    assert rc == 0
    assert read_trace(tmp_path / "u.csv").column("step_norm")[-1] <= 1e-8


def test_validate_pass_exit_0(capsys):
    rc = main(["validate", "dc1d"])
    captured = capsys.readouterr().out
    assert rc == 0
    assert "upper-c2:      PASS" in captured
    assert "linearization:" in captured


def test_validate_wrong_rho_exit_4(capsys):
    rc = main(["validate", "dc1d", "--rho", "0.1"])
    captured = capsys.readouterr().out
    assert rc == 4
    assert "upper-c2:      FAIL" in captured
    assert "worst pair" in captured


def test_validate_deterministic_output(capsys):
    assert main(["validate", "recourse2", "--samples", "500", "--seed", "7"]) == 0
    first = capsys.readouterr().out
    assert main(["validate", "recourse2", "--samples", "500", "--seed", "7"]) == 0
    assert capsys.readouterr().out == first


def test_rate_exact_geometric(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    synthetic_trace(trace, [1.0 + 2.0 * 0.5**k for k in range(10)] + [1.0])
    out = tmp_path / "r.csv"
    rc = main(["rate", str(trace), "--out", str(out)])
    captured = capsys.readouterr().out
    assert rc == 0
    assert float(stdout_value(captured, "q0")) == pytest.approx(0.5, abs=1e-12)
    assert float(stdout_value(captured, "q1")) == pytest.approx(2.0, abs=1e-12)
    assert float(stdout_value(captured, "r_squared")) == pytest.approx(1.0, abs=1e-12)

    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "k,error,log_error,fitted_log_error"
    assert len(lines) == 11
    first = lines[1].split(",")
    assert first[0] == "0"
    assert float(first[1]) == pytest.approx(2.0, abs=1e-15)
    assert float(first[2]) == pytest.approx(np.log(2.0), abs=1e-12)
    assert float(first[3]) == pytest.approx(np.log(2.0), abs=1e-12)


def test_rate_constant_errors_warn_exit_0(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    synthetic_trace(trace, [2.0, 2.0, 2.0, 2.0, 1.0])
    rc = main(["rate", str(trace), "--out", str(tmp_path / "r.csv")])
    captured = capsys.readouterr().out
    assert rc == 0
    assert float(stdout_value(captured, "q0")) == pytest.approx(1.0, abs=1e-12)
    assert "no contraction" in captured


def test_rate_short_trace_exit_5(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    synthetic_trace(trace, [2.0, 1.5, 1.0])
    rc = main(["rate", str(trace), "--out", str(tmp_path / "r.csv")])
    assert rc == 5
    assert "need 3" in capsys.readouterr().err


def test_rate_tail_flag_uses_suffix(tmp_path, capsys):
    # non-geometric head, exact geometric tail
    xs = [1.0 + e for e in (9.0, 2.0, 1.0, 0.5, 0.25, 0.125)] + [1.0]
    trace = tmp_path / "t.csv"
    synthetic_trace(trace, xs)
    out = tmp_path / "r.csv"
    rc = main(["rate", str(trace), "--tail", "4", "--out", str(out)])
    captured = capsys.readouterr().out
    assert rc == 0
    assert float(stdout_value(captured, "q0")) == pytest.approx(0.5, abs=1e-12)
    # table keeps the original iteration indices of the fitted suffix
    lines = out.read_text(encoding="utf-8").splitlines()
    assert [row.split(",")[0] for row in lines[1:]] == ["2", "3", "4", "5"]


def test_rate_matches_library_fit(tmp_path, capsys):
    out = tmp_path / "t.csv"
    assert main(["solve", "dc1d", "--out", str(out)]) == 0
    capsys.readouterr()
    rc = main(["rate", str(out)])
    captured = capsys.readouterr().out
    assert rc == 0
    errors = positive_prefix(trace_errors(dc1d_trace()))
    fit = fit_linear_rate(errors)
    assert float(stdout_value(captured, "q0")) == fit.q0
    assert float(stdout_value(captured, "r_squared")) == fit.r_squared
    assert fit.q0 < 1.0
    assert fit.r_squared >= 0.9
    assert (tmp_path / "t_rate.csv").exists()


def test_rate_plot_writes_figure(tmp_path, capsys):
    trace = tmp_path / "t.csv"
    synthetic_trace(trace, [1.0 + 2.0 * 0.5**k for k in range(8)] + [1.0])
    out = tmp_path / "r.csv"
    rc = main(["rate", str(trace), "--out", str(out), "--plot"])
    capsys.readouterr()
    assert rc == 0
    assert (tmp_path / "r.png").exists()


def test_rate_missing_file_exit_1(tmp_path, capsys):
    rc = main(["rate", str(tmp_path / "absent.csv")])
    assert rc == 1
    capsys.readouterr()


def test_monitor_all_dc1d_exit_0(capsys):
    rc = main(["monitor", "dc1d", "--all"])
    captured = capsys.readouterr().out
    assert rc == 0
    for mon in ("multiplier-bounds", "merit-decrease", "theta-tail",
                "slack-tail", "step-bound", "subgradient"):
        assert f"{mon}: PASS" in captured
    # default b sits below the potential moderation weight; skipped, not fatal
    assert "potential: SKIP" in captured


def test_monitor_explicit_premise_exit_6(capsys):
    rc = main(["monitor", "dc1d", "--potential"])
    captured = capsys.readouterr().out
    assert rc == 6
    assert "PREMISE VIOLATED" in captured


def test_monitor_potential_with_params_exit_0(capsys):
    rc = main(["monitor", "dc1d", "--potential", "--subgradient",
               "--sigma", "3", "--ell", "2", "--b", "4"])
    captured = capsys.readouterr().out
    assert rc == 0
    for line in captured.splitlines():
        if line.startswith(("potential:", "subgradient:")):
            margin = float(line.split("margin=")[1].split()[0])
            assert margin >= -1e-4


def test_monitor_sigma_without_ell_exit_1(capsys):
    rc = main(["monitor", "dc1d", "--potential", "--sigma", "3"])
    assert rc == 1
    assert "together" in capsys.readouterr().err


def test_monitor_nothing_selected_exit_1(capsys):
    rc = main(["monitor", "dc1d"])
    assert rc == 1
    assert "--all" in capsys.readouterr().err


def test_monitor_genuine_failure_exit_4(capsys):
    # weak initial penalty: theta creeps past the midpoint of the run
    rc = main(["monitor", "infeasible-lin", "--theta-tail", "--theta0", "0.01"])
    captured = capsys.readouterr().out
    assert rc == 4
    assert "theta-tail: FAIL" in captured
