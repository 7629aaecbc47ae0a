import json
import subprocess
import sys

import numpy as np
import pytest

from wskit import Architecture, act, random_group_element, random_weights, save_weights
from wskit.cli import EXIT_FAIL, EXIT_JSON, EXIT_OK, EXIT_USAGE, main, parse_perm
from wskit.errors import WSKitError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


@pytest.fixture
def wfile(tmp_path, tiny):
    p = tmp_path / "w.json"
    save_weights(tiny, p)
    return str(p)


class TestPermParsing:
    def test_layers_and_defaults(self):
        arch = Architecture((1, 2, 3, 1))
        assert parse_perm("2:2,0,1", arch).perms == ((0, 1), (2, 0, 1))
        assert parse_perm("1:1,0;2:1,2,0", arch).perms == ((1, 0), (1, 2, 0))
        assert parse_perm("", arch).is_identity

    @pytest.mark.parametrize("spec", ["3:0,1", "1:0,0", "x:1,0", "1:a,b"])
    def test_rejects(self, spec):
        with pytest.raises(WSKitError):
            parse_perm(spec, Architecture((1, 2, 3, 1)))


class TestCommands:
    def test_forward(self, capsys, wfile):
        code, rep = run(capsys, "forward", wfile, "--x", "2")
        assert code == EXIT_OK and rep["pass"]
        assert rep["results"]["output"] == [pytest.approx(23.0)]

    def test_act_matches_library(self, capsys, tmp_path):
        arch = Architecture((2, 3, 2))
        v = random_weights(arch, seed=0)
        p = tmp_path / "v.json"
        save_weights(v, p)
        code, rep = run(capsys, "act", str(p), "--perm", "1:2,0,1")
        expected = act(parse_perm("1:2,0,1", arch), v)
        np.testing.assert_array_equal(rep["results"]["weights"]["layers"][0]["W"], expected.W[0][..., 0])

    def test_canonize_and_gp(self, capsys, wfile):
        code, rep = run(capsys, "canonize", wfile)
        assert code == EXIT_OK and rep["results"]["g_v"] == [[1, 0]]
        code, rep = run(capsys, "gp-check", wfile, "--tol", "10")
        assert code == EXIT_FAIL and rep["results"]["general_position"] is False

    def test_graph(self, capsys, wfile):
        code, rep = run(capsys, "graph", wfile, "--variant", "ng", "--wl", "--dot")
        assert code == EXIT_OK
        assert "digraph" in rep["results"]["dot"]

    def test_counterexamples(self, capsys):
        code, rep = run(capsys, "counterexample", "nft")
        assert code == EXIT_OK
        assert rep["results"]["outputs"] == [pytest.approx(8 / 33), pytest.approx(16 / 33)]
        code, rep = run(capsys, "counterexample", "wl")
        assert code == EXIT_OK and rep["results"]["ranks"] == [3, 2]
        code, rep = run(capsys, "counterexample", "scaling", "--lam", "3")
        assert code == EXIT_OK and rep["results"]["invariant_right"] == 3.0
        assert run(capsys, "counterexample", "scaling", "--lam", "-1")[0] == EXIT_USAGE

    def test_equiv_test(self, capsys, tmp_path, rng):
        arch = Architecture((1, 3, 1))
        v = random_weights(arch, seed=1)
        a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
        save_weights(v, a)
        save_weights(act(random_group_element(arch, rng), v), b)
        save_weights(random_weights(arch, seed=2), c)
        code, rep = run(capsys, "equiv-test", str(a), str(b), "--exact-1d")
        assert code == EXIT_OK and rep["results"]["g_equivalent"]
        code, rep = run(capsys, "equiv-test", str(a), str(c))
        assert code == EXIT_FAIL and not rep["results"]["functionally_equal"]

    def test_simulate(self, capsys):
        code, rep = run(capsys, "simulate-ng-dws", "--arch", "2,3,2", "--seed", "4")
        assert code == EXIT_OK and rep["results"]["max_abs_deviation"] <= 1e-9

    def test_regions(self, capsys, wfile):
        code, rep = run(capsys, "regions", wfile, "--interval=-1,1")
        assert code == EXIT_OK
        assert rep["results"]["n_regions"] == 3 and rep["results"]["region_bound"] == 4

    def test_pretty(self, capsys, wfile):
        assert main(["--pretty", "gp-check", wfile]) == EXIT_OK
        assert capsys.readouterr().out.startswith("{\n")


class TestExitCodesAndDeterminism:
    def test_usage(self, capsys):
        assert main([]) == EXIT_USAGE
        assert main(["forward"]) == EXIT_USAGE
        assert main(["no-such-command"]) == EXIT_USAGE

    def test_help(self, capsys):
        assert main(["--help"]) == EXIT_OK

    def test_bad_json(self, capsys, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{nope")
        assert main(["forward", str(p), "--x", "1"]) == EXIT_JSON

    def test_missing_file_and_bad_shape(self, capsys, tmp_path):
        assert main(["forward", str(tmp_path / "missing.json"), "--x", "1"]) == EXIT_USAGE
        p = tmp_path / "shape.json"
        p.write_text(json.dumps({"dims": [1, 2, 1], "layers": [{"W": [[1]], "b": [0, 0]}, {"W": [[1, 1]], "b": [0]}]}))
        assert main(["forward", str(p), "--x", "1"]) == EXIT_USAGE

    def test_dimension_mismatch(self, capsys, wfile):
        assert main(["forward", wfile, "--x", "1,2"]) == EXIT_USAGE

    def test_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("WSKIT_SEED", "7")
        _, a = run(capsys, "simulate-ng-dws", "--arch", "1,2,1")
        _, b = run(capsys, "simulate-ng-dws", "--arch", "1,2,1", "--seed", "7")
        assert a == b
        monkeypatch.setenv("WSKIT_SEED", "seven")
        assert main(["simulate-ng-dws", "--arch", "1,2,1"]) == EXIT_USAGE

    def test_byte_stable_output(self, wfile):
        cmd = [sys.executable, "-m", "wskit.cli", "canonize", wfile]
        outs = [subprocess.run(cmd, capture_output=True, check=True).stdout for _ in range(2)]
        assert outs[0] == outs[1]
        assert json.loads(outs[0])["command"] == "canonize"
