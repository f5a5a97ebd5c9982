import csv

import pytest

from afem2d import load_geometry
from afem2d.cli import build_parser, main


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_poisson_command(tmp_path, capsys):
    out = tmp_path / "poisson.csv"
    assert main(["poisson", "--max-elements", "500", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows and int(rows[0]["level"]) == 0
    assert "nDofs" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["lshape", "--order", "2", "--max-dofs", "300"],
    ["lshape", "--error", "interpolant", "--max-dofs", "200", "--strategy", "rgb"],
    ["goafem", "--max-dofs", "300", "--theta", "0.3"],
    ["ailfem", "--method", "newton", "--max-dofs", "200"],
    ["poisson", "--max-dofs", "1e2", "--solver", "cg"],
])
def test_experiment_commands(argv, tmp_path):
    out = tmp_path / "h.csv"
    assert main(argv + ["--out", str(out)]) == 0
    rows = read_csv(out)
    assert float(rows[-1]["estimator"]) < float(rows[0]["estimator"])


def test_export_mesh(tmp_path):
    target = tmp_path / "mesh"
    assert main(["export-mesh", str(target), "--geometry", "Lshape", "--uniform", "2"]) == 0
    assert load_geometry(target).n_elements == 6 * 16
    adapted = tmp_path / "adapted"
    assert main(["export-mesh", str(adapted), "--experiment", "lshape", "--max-dofs", "200"]) == 0
    assert load_geometry(adapted).n_elements > 6


@pytest.mark.parametrize("argv", [
    ["poisson", "--theta", "0"],
    ["poisson", "--max-dofs", "-3"],
    ["lshape", "--strategy", "newest"],
    ["ailfem", "--method", "picard"],
    [],
])
def test_invalid_arguments(argv):
    with pytest.raises(SystemExit):
        build_parser().parse_args(argv)
