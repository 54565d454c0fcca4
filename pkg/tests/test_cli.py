import io
import subprocess
import sys

import numpy as np
import pytest

from ifred.cli import CSV_HEADER, main
from ifred.mesh import read_mesh_text, validate_mesh


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def rows(text):
    lines = text.splitlines()
    assert lines[0].startswith("# mesh ")
    assert lines[1] == CSV_HEADER
    return np.array([[float(c) for c in ln.split(",")] for ln in lines[2:]])


def test_header_is_exact():
    assert CSV_HEADER == "m,g_rel_err,eu_rms,eu_inf,eq_rms,eq_inf,residual"


def test_table_1():
    code, out, _ = run("table", "--id", "1")
    assert code == 0
    data = rows(out)
    assert data[:, 0].tolist() == [1, 2, 3]
    assert data[0, 1] == pytest.approx(0.3602, abs=1e-3)
    assert out.splitlines()[0] == "# mesh n=64 quad_order=10"
    assert "\r" not in out


def test_table_4_collapses_at_m10():
    code, out, _ = run("table", "--id", "4")
    data = rows(out)
    assert code == 0 and data[:, 0].tolist() == [1, 5, 10]
    assert data[2, 1] <= 1e-13
    assert np.all(data[2, 2:6] <= 1e-11)


def test_table_5_rows():
    code, out, _ = run("table", "--id", "5")
    data = rows(out)
    assert data[:, 0].tolist() == [1, 3, 5, 8, 10]
    assert np.all(np.diff(data[:, 1]) <= 0)
    assert data[-1, 1] <= 1e-13


def test_cells_use_four_significant_digits():
    _, out, _ = run("sweep", "--case", "line-flux", "--m-max", "2", "--n", "8")
    for line in out.splitlines()[2:]:
        m, *cells = line.split(",")
        assert m.isdigit()
        for c in cells:
            mant, exp = c.split("e")
            assert len(mant.lstrip("-")) == 5 and len(exp) == 3


def test_sweep_single_row_and_collapse():
    code, out, _ = run("sweep", "--case", "line-flux", "--basis", "adapted_line", "--m-max", "1",
                       "--n", "16")
    assert code == 0 and len(rows(out)) == 1
    _, out, _ = run("sweep", "--case", "line-flux", "--m-max", "3", "--n", "16")
    data = rows(out)
    assert data[2, 1] <= 1e-13 and np.all(data[2, 2:] <= 1e-11)


def test_solve_one_rank():
    code, out, _ = run("solve", "--case", "circle-sol", "--m", "5", "--n-theta", "32",
                       "--n-radial", "4")
    assert code == 0
    assert rows(out)[:, 0].tolist() == [5]
    assert out.splitlines()[0] == "# mesh n_theta=32 n_radial_in=4 n_radial_out=4 quad_order=10"


def test_table_output_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run("table", "--id", "3", "--out", str(a))[0] == 0
    assert run("table", "--id", "3", "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_convergence_command():
    code, out, _ = run("convergence")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n,h,eu_l2,eq_hdiv,order_u,order_q"
    data = np.array([[float(c) for c in ln.split(",")] for ln in lines[1:]])
    assert data[:, 0].tolist() == [16, 32, 64, 128]
    assert np.all(data[1:, 5] >= 0.9) and np.all(data[1:, 4] >= 1.8)


def test_export_mesh_and_flux(tmp_path):
    code, out, _ = run("export", "--kind", "mesh", "--n", "2")
    assert code == 0
    assert out.splitlines()[0] == "vertices 9 triangles 8 interface_edges 2"

    path = tmp_path / "circle.txt"
    code, _, _ = run("export", "--kind", "mesh", "--case", "circle-flux", "--n-theta", "32",
                     "--n-radial", "4", "--out", str(path))
    assert code == 0
    assert validate_mesh(read_mesh_text(path)).ok

    code, out, _ = run("export", "--kind", "flux", "--n", "4")
    assert code == 0 and len(out.splitlines()) == 32


@pytest.mark.parametrize("argv", [
    ("table", "--id", "6"),
    ("table",),
    (),
    ("sweep", "--case", "nowhere", "--m-max", "2"),
    ("sweep", "--case", "circle-flux", "--basis", "poly", "--m-max", "2"),
    ("sweep", "--case", "line-flux", "--m-max", "0"),
    ("solve", "--case", "line-flux", "--m", "0"),
    ("solve", "--case", "circle-flux", "--m", "1", "--n-theta", "30"),
    ("solve", "--case", "line-flux", "--m", "1", "--n", "7"),
    ("export", "--kind", "mesh", "--n", "2", "--out", "/nonexistent/dir/mesh.txt"),
])
def test_configuration_errors_exit_1(argv):
    code, out, err = run(*argv)
    assert code == 1
    assert err.startswith("ifred: error:")


def test_numerical_failure_exits_2():
    code, _, err = run("sweep", "--case", "line-flux", "--basis", "poly", "--m-max", "30",
                       "--n", "8")
    assert code == 2
    assert "numerical failure" in err


def test_extra_pair_behind_flag():
    code, out, _ = run("sweep", "--case", "circle-flux", "--basis", "poly", "--m-max", "2",
                       "--n-theta", "16", "--n-radial", "2", "--allow-extra")
    assert code == 0 and len(rows(out)) == 2


def test_selftest_passes():
    code, out, _ = run("selftest")
    assert code == 0
    lines = out.splitlines()
    assert len(lines) >= 6
    assert all(ln.startswith("PASS ") for ln in lines)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ifred", "sweep", "--m-max", "1", "--n", "4"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == CSV_HEADER
