import io
import json

import pytest

from lnwald import cli, datasets
from lnwald.influence import if_limit
from lnwald.model import LognormalParams


def run(*argv, stdin=None):
    out = io.StringIO()
    code = cli.main(list(argv), out=out, stdin=None if stdin is None else io.StringIO(stdin))
    return code, out.getvalue()


def run_json(*argv, stdin=None):
    code, text = run(*argv, stdin=stdin)
    assert code == 0, text
    return json.loads(text)


class TestFit:
    def test_baaqmd_without_outlier(self):
        d = run_json("fit", "air-baaqmd[:8]", "--beta", "0")
        assert d["n"] == 8 and round(d["mu"], 2) == 2.69
        assert round(d["sigma2_unbiased"], 2) == 0.33

    def test_continuity(self, tmp_path):
        f = tmp_path / "x.txt"
        f.write_text("\n".join(f"{v:.15g}" for v in datasets.load("cloud-seeded").values))
        a = run_json("fit", str(f), "--beta", "0")
        b = run_json("fit", str(f), "--beta", "1e-6")
        assert abs(a["mu"] - b["mu"]) < 1e-4 and abs(a["sigma"] - b["sigma"]) < 1e-4

    def test_empty_file(self, tmp_path):
        f = tmp_path / "empty.txt"
        f.write_text("")
        assert run("fit", str(f))[0] == 2

    def test_missing_file(self, tmp_path):
        assert run("fit", str(tmp_path / "nope.txt"))[0] == 2

    def test_non_positive(self):
        assert run("fit", "-", stdin="1\n2\n-3\n")[0] == 2

    def test_garbage_line(self):
        assert run("fit", "-", stdin="1\n2\nabc\n")[0] == 2

    def test_csv_header(self):
        d = run_json("fit", "-", "--beta", "0.2", stdin="co_ppm\n1.5\n2.5\n3.0\n7.0\n")
        assert d["n"] == 4 and d["beta"] == 0.2

    def test_beta_range(self):
        assert run("fit", "cloud-natural", "--beta", "1.5")[0] == 2

    def test_plain(self):
        code, text = run("fit", "cloud-natural", "--format", "plain")
        assert code == 0 and text.startswith("mu: ")


class TestTest:
    def test_cloud_dpd(self):
        d = run_json("test", "cloud-natural", "cloud-seeded", "--method", "dpd", "--beta", "0.2")
        assert round(d["p_value"], 4) == 0.2415 and d["reject"] is False and d["alpha"] == 0.05

    def test_air_z(self):
        d = run_json("test", "air-refinery", "air-baaqmd", "--method", "z")
        assert round(d["p_value"], 4) == 0.0654

    def test_beta_with_baseline(self):
        assert run("test", "air-refinery", "air-baaqmd", "--method", "z", "--beta", "0.1")[0] == 2

    def test_same_sample(self):
        d = run_json("test", "cloud-natural", "cloud-natural")
        assert d["beta"] == 0.1 and d["p_value"] == pytest.approx(1.0)

    def test_bootstrap_seeded(self):
        args = ("test", "cloud-natural", "cloud-seeded", "--method", "bootstrap", "--seed", "3")
        assert run_json(*args) == run_json(*args)

    def test_schema(self):
        d = run_json("test", "air-refinery", "air-baaqmd")
        assert list(d) == ["method", "beta", "statistic", "p_value", "n1", "n2", "eta_hat", "m_hat",
                           "sigma2_m_hat", "reference", "diagnostics", "alpha", "reject"]
        assert set(d["eta_hat"]) == {"mu1", "sigma1", "mu2", "sigma2"}

    def test_round_trip(self):
        code, text = run("dataset", "cloud-seeded")
        assert code == 0
        via_pipe = run_json("test", "cloud-natural", "-", "--beta", "0.2", stdin=text)
        direct = run_json("test", "cloud-natural", "cloud-seeded", "--beta", "0.2")
        assert via_pipe["statistic"] == direct["statistic"]

    def test_numerical_failure_exit(self, monkeypatch):
        from lnwald.exceptions import ConvergenceError

        def boom(*a, **k):
            raise ConvergenceError("forced")

        monkeypatch.setattr(cli, "run_method", boom)
        assert run("test", "cloud-natural", "cloud-seeded")[0] == 3


class TestInfluence:
    def test_one_point(self):
        code, text = run("influence", "--beta", "0.3", "--xmin", "1", "--xmax", "1", "--points", "1")
        lines = text.splitlines()
        assert code == 0 and lines[0] == "beta,x,if_mu,if_sigma" and len(lines) == 2

    @pytest.mark.parametrize("args", [("--xmin", "0"), ("--xmin", "10", "--xmax", "1"),
                                      ("--points", "0"), ("--sigma", "-1"), ("--beta", "2")])
    def test_invalid(self, args):
        assert run("influence", *args)[0] == 2

    def test_stabilizes_and_grows(self):
        code, text = run("influence", "--beta", "0", "0.3", "--xmax", "1e10")
        rows = [line.split(",") for line in text.splitlines()[1:]]
        robust = [float(r[3]) for r in rows if r[0] == "0.3"]
        mle = [float(r[3]) for r in rows if r[0] == "0"]
        limit = if_limit(LognormalParams(0.0, 1.0), 0.3)[1]
        assert code == 0 and len(robust) == 61
        assert abs(robust[-1] - limit) < 1e-6 and mle[-1] > mle[-10] > 10


class TestSimulate:
    def test_unknown_preset(self):
        assert run("simulate", "nope")[0] == 2

    def test_bad_override(self):
        assert run("simulate", "equal-var-level", "--reps", "5")[0] == 2

    def test_small_json(self):
        d = run_json("simulate", "equal-var-power", "--reps", "100", "--sizes", "100", "--format", "json")
        assert d["scenario"] == "equal-var-power" and d["replications"] == 100
        rates = {(r["method"], r["beta"]): r["rejection_rate"] for r in d["rows"]}
        assert len(rates) == 6 and rates[("dpd", 0.1)] > 0.9

    @pytest.mark.slow
    def test_level_preset(self):
        code, text = run("simulate", "equal-var-level", "--reps", "1000", "--seed", "42")
        rows = [line.split(",") for line in text.splitlines()[1:]]
        assert code == 0 and len(rows) == 24
        assert all(0.03 <= float(r[6]) <= 0.07 for r in rows if r[1] == "dpd")

    def test_presets_listing(self):
        code, text = run("presets")
        assert code == 0 and len(text.splitlines()) == 9


class TestSweep:
    def test_json(self):
        d = run_json("sweep", "air-refinery", "air-baaqmd", "--values", "170", "300", "--format", "json")
        p = [r["p_values"]["DPD(0)"] for r in d["rows"]]
        assert p[0] < 0.05 < p[1]

    def test_csv_header(self):
        code, text = run("sweep", "air-refinery", "air-baaqmd", "--values", "170")
        assert code == 0 and text.splitlines()[0] == "value,DPD(0),DPD(0.1),DPD(0.2),Z,LRT"

    def test_bad_index(self):
        assert run("sweep", "air-refinery", "air-baaqmd", "--index", "20", "--values", "10")[0] == 2

    def test_bad_value(self):
        assert run("sweep", "air-refinery", "air-baaqmd", "--values", "-1")[0] == 2


class TestDataset:
    @pytest.mark.parametrize("name,n", [("air-refinery", 31), ("air-baaqmd", 9),
                                        ("cloud-natural", 26), ("cloud-seeded", 26)])
    def test_counts(self, name, n):
        code, text = run("dataset", name)
        assert code == 0 and len(text.splitlines()) == n

    def test_baaqmd_ends_170(self):
        assert run("dataset", "air-baaqmd")[1].splitlines()[-1] == "170"

    def test_cloud_max(self):
        assert max(float(v) for v in run("dataset", "cloud-natural")[1].split()) == 1202.6

    def test_unknown(self):
        assert run("dataset", "nope")[0] == 2

    def test_listing(self):
        assert run("dataset")[1].split() == list(datasets.NAMES)

    def test_slice(self):
        assert len(run("dataset", "cloud-natural[:-1]")[1].splitlines()) == 25


def test_no_command():
    assert run()[0] == 2
