import json

import numpy as np
import pytest

from qroof import verify
from qroof.cli import CliError, main, parse_range
from qroof.ensembles import Ensemble
from qroof.io import channel_to_dict, ensemble_to_dict, load_ensemble, save_json, save_state
from qroof.locc import identity_channel
from qroof.states import bell_state, haar_pure, induced_mixed


@pytest.fixture
def files(tmp_path):
    save_state(bell_state(), tmp_path / "bell.json", dims=[2, 2])
    save_state(np.diag([0.5, 0.5]), tmp_path / "mix.json")
    save_state(induced_mixed(2, None, 3), tmp_path / "qubit.json")
    save_state(np.diag([0.0, 1.0]), tmp_path / "h.json")
    save_json(channel_to_dict(identity_channel(2)), tmp_path / "id.json")
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_monotone_bell(files, capsys):
    code, out, _ = run(capsys, "monotone", "--spec", "eof", "--dims", "2x2", "--state", files / "bell.json")
    assert code == 0
    assert float(out) == pytest.approx(1.0, abs=1e-6)


def test_monotone_writes_witness(files, capsys):
    out_path = files / "res.json"
    code, _, _ = run(capsys, "monotone", "--spec", "renyi:p=0.5", "--dims", "2x2", "--keep", "B",
                     "--state", files / "bell.json", "--out", out_path)
    data = json.loads(out_path.read_text())
    assert code == 0 and data["schema_version"] == 1
    assert data["value"] == pytest.approx(1.0, abs=1e-9)


def test_eval_renyi_half(files, capsys):
    code, out, _ = run(capsys, "eval", "--functional", "renyi:p=0.5", "--state", files / "mix.json")
    assert code == 0 and float(out) == pytest.approx(1.0, abs=1e-12)


def test_hull_roof_closure(files, capsys):
    code, out, _ = run(capsys, "hull", "--functional", "H", "--state", files / "qubit.json", "--restarts", 4)
    assert code == 0 and float(out) <= 1e-6
    code, out, _ = run(capsys, "roof", "--functional", "alpha:a=2", "--state", files / "qubit.json", "--restarts", 4)
    assert code == 0 and float(out) <= 1e-6
    code, out, _ = run(capsys, "closure", "--functional", "H", "--state", files / "qubit.json", "--out", files / "c.json")
    assert code == 0 and float(out) <= 1e-2
    assert set(json.loads((files / "c.json").read_text())) >= {"value", "upper_bound", "dual_operator"}


def test_verify_jensen_report(files, capsys):
    out_path = files / "report.json"
    code, out, _ = run(capsys, "verify", "--suite", "jensen", "--trials", 1000, "--seed", 42, "--out", out_path)
    data = json.loads(out_path.read_text())
    assert code == 0
    assert data["n_trials"] == 1000 and data["n_passed"] == 1000 and data["schema_version"] == 1
    assert out.strip() == "1000 of 1000 trials passed"


def test_verify_failure_exit_code(files, capsys, monkeypatch):
    def failing(index, seed, cfg):
        e = Ensemble([1.0], [haar_pure(2, index)])
        return verify.TrialResult(index, index != 1, {"x": float(index)}, {"bad": ensemble_to_dict(e)})

    monkeypatch.setitem(verify.TRIALS, "jensen", failing)
    monkeypatch.delenv("QROOF_THREADS", raising=False)
    wpath = files / "w.json"
    code, _, err = run(capsys, "verify", "--suite", "jensen", "--trials", 3, "--witness-out", wpath,
                       "--out", files / "r.json")
    assert code == 2
    assert "1 of 3" in err
    dump = json.loads(wpath.read_text())
    assert [f["index"] for f in dump["failures"]] == [1]
    assert "bad" in dump["failures"][0]["witnesses"]


@pytest.mark.parametrize(
    "argv",
    [
        ["eval", "--functional", "renyi:q=1", "--state", "{d}/mix.json"],
        ["eval", "--functional", "H", "--state", "{d}/missing.json"],
        ["monotone", "--spec", "eof", "--dims", "3x3", "--state", "{d}/bell.json"],
        ["monotone", "--spec", "eof", "--dims", "2by2", "--state", "{d}/bell.json"],
        ["verify", "--suite", "nope"],
        ["sweep", "--param", "p", "--range", "2:1:0.5", "--state", "{d}/mix.json"],
        ["capacity", "--channel", "{d}/id.json", "--hamiltonian", "{d}/h.json"],
        ["capacity", "--channel", "{d}/id.json", "--p-schedule", "1.1,1.5"],
        ["capacity", "--channel", "{d}/id.json", "--hamiltonian", "{d}/h.json", "--energy", "-1"],
        ["frobnicate"],
    ],
)
def test_domain_errors_exit_one(files, capsys, argv):
    code, out, err = run(capsys, *[a.format(d=files) for a in argv])
    assert code == 1
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("error: ")


def test_malformed_json_error_names_file(files, capsys):
    bad = files / "bad.json"
    bad.write_text('{\n  "dims": [2],\n  "matrix": [\n')
    code, _, err = run(capsys, "eval", "--functional", "H", "--state", bad)
    assert code == 1 and err.startswith(f"error: {bad}:")


def test_parse_range():
    assert parse_range("1.1:1.5:0.1") == [1.1, 1.2, 1.3, 1.4, 1.5]
    with pytest.raises(CliError):
        parse_range("1:2")


def test_sweep_csv(files, capsys):
    out_path = files / "s.csv"
    code, _, _ = run(capsys, "sweep", "--param", "alpha", "--range", "1.5:2.5:0.5", "--state", files / "bell.json",
                     "--dims", "2x2", "--out", out_path)
    rows = out_path.read_text().splitlines()
    assert code == 0
    assert rows[0] == "param,value,converged,gap"
    params = [float(r.split(",")[0]) for r in rows[1:]]
    assert params == [1.5, 2.0, 2.5]
    values = [float(r.split(",")[1]) for r in rows[1:]]
    # f_alpha at the maximally mixed qubit is 2(1 - 2^(1 - alpha))
    assert values == pytest.approx([2 * (1 - 2 ** (1 - a)) for a in params], abs=1e-8)


def test_sweep_renyi_hull(files, capsys):
    code, out, _ = run(capsys, "sweep", "--param", "p", "--range", "0.5:1.5:0.5", "--state", files / "qubit.json",
                       "--restarts", 4)
    rows = out.strip().splitlines()
    assert code == 0 and len(rows) == 4
    assert all(float(r.split(",")[1]) <= 1e-6 for r in rows[1:])


def test_capacity_identity(files, capsys):
    code, out, _ = run(capsys, "capacity", "--channel", files / "id.json", "--p-schedule", "1.5,1.1,1.01",
                       "--restarts", 4, "--out", files / "cap.json")
    lines = dict(line.split() for line in out.strip().splitlines())
    assert code == 0
    assert float(lines["extrapolated"]) == pytest.approx(1.0, abs=1e-2)
    assert float(lines["chi_oracle"]) == pytest.approx(1.0, abs=1e-2)
    assert json.loads((files / "cap.json").read_text())["schema_version"] == 1


def test_coarsen_round_trip(files, capsys):
    rng = np.random.default_rng(0)
    e = Ensemble(rng.dirichlet(np.ones(10)), [haar_pure(2, rng) for _ in range(10)])
    save_json(ensemble_to_dict(e), files / "e.json")
    code, out, _ = run(capsys, "coarsen", "--ensemble", files / "e.json", "--diameter", 0.8,
                       "--hamiltonian", files / "h.json", "--threshold", 0.5, "--out", files / "c.json")
    assert code == 0 and out.startswith("10 atoms -> ")
    back = load_ensemble(files / "c.json")
    assert len(back) <= 10
    assert np.allclose(back.barycenter(), e.barycenter(), atol=1e-12)


def test_threads_do_not_change_values(files, capsys, monkeypatch):
    outputs = []
    for threads in ("1", "3"):
        monkeypatch.setenv("QROOF_THREADS", threads)
        path = files / f"r{threads}.json"
        assert run(capsys, "verify", "--suite", "concavity", "--trials", 6, "--seed", 5, "--out", path)[0] == 0
        outputs.append(json.loads(path.read_text())["trials"])
    assert json.dumps(outputs[0]) == json.dumps(outputs[1])
