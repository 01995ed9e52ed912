import io
import json
import subprocess
import sys

import pytest

from centralbinom.cli import parse_int, run


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), stream=buf)
    return code, buf.getvalue()


@pytest.mark.parametrize("text,value", [("1000", 1000), ("10^4", 10**4), ("2^20", 2**20), ("2**20", 2**20), ("1e4", 10**4), ("0x10", 16)])
def test_parse_int(text, value):
    assert parse_int(text) == value


def test_heuristic():
    code, out = call("heuristic", "--primes", "3,5,7")
    assert code == 0
    d = json.loads(out)
    assert abs(d["sigma"] - 0.974) < 0.0005
    assert d["verdict"] == "ExpectInfinite"


def test_search_output_shape():
    code, out = call("search", "--primes", "3,5,7", "--limit", "1000")
    lines = out.strip().splitlines()
    nums = [int(x) for x in lines[:-1]]
    summary = json.loads(lines[-1])
    assert {756, 757} <= set(nums)
    assert summary["count"] == len(nums) and summary["complete"]
    assert "elapsed" not in summary


def test_search_timing_opt_in():
    _, out = call("search", "--primes", "3,5,7", "--limit", "1000", "--timing")
    assert "elapsed" in json.loads(out.strip().splitlines()[-1])


def test_search_checkpoint_resume(tmp_path):
    ck = str(tmp_path / "ck.bin")
    full = call("search", "--primes", "3,5,7", "--limit", "10^6")[1].splitlines()[:-1]
    _, part = call("search", "--primes", "3,5,7", "--limit", "10^6", "--checkpoint", ck, "--node-budget", "40")
    assert json.loads(part.splitlines()[-1])["complete"] is False
    _, rest = call("search", "--primes", "3,5,7", "--limit", "10^6", "--checkpoint", ck)
    assert rest.splitlines()[:-1] == full
    code, _ = call("search", "--primes", "3,5", "--limit", "10^6", "--checkpoint", ck)
    assert code == 2


def test_search_census_figure(tmp_path):
    fig = tmp_path / "c.png"
    _, out = call("search", "--primes", "3", "--limit", "3^8", "--figure", str(fig))
    summary = json.loads(out.splitlines()[-1])
    assert summary["census"][-1]["count"] == 2**8
    assert fig.stat().st_size > 0


def test_kummer():
    code, out = call("kummer", "--n", "5", "--prime", "3")
    assert code == 0 and json.loads(out)["valuation"] == 2


def test_construct(tmp_path):
    code, out = call("construct", "--primes", "1009", "--N", "200", "--H", "2", "--t", "1", "--epsilon", "0.1")
    d = json.loads(out)
    assert code == 0
    assert d["theorem_bound_holds"] == [True]
    from centralbinom.core_arith import kummer_valuation

    assert kummer_valuation(int(d["n"]), 1009).valuation == d["per_prime_valuation"][0][1]
    code, out = call("construct", "--primes", "1009", "--N", "200", "--H", "2", "--t", "1", "--n-file", str(tmp_path / "n.hex"))
    d2 = json.loads(out)
    assert int((tmp_path / "n.hex").read_text(), 16) == int(d["n"])
    assert d2["n_bits"] == d["n_bits"]


def test_equidist_verbs(tmp_path):
    code, out = call("--format", "csv", "equidist", "orbit", "--primes", "3", "--N", "3")
    assert code == 0
    rows = out.strip().splitlines()
    assert rows[0] == "n,p3" and rows[1].startswith("1,0.630929")
    code, out = call("equidist", "weyl", "--primes", "3,5", "--N", "1000", "--k", "1,-1")
    assert json.loads(out)[0]["magnitude"] < 0.2
    code, out = call("equidist", "boxes", "--primes", "3", "--N", "10000", "--P", "100")
    assert json.loads(out)["max_occupancy"] <= 0.03
    code, out = call("equidist", "relations", "--primes", "3,5", "--height", "10")
    assert json.loads(out)["relations"] == []
    code, out = call("equidist", "curves", "--primes", "3,5,7", "--relation", "1,1,-1,0", "--verify-N", "300")
    d = json.loads(out)
    assert d["cover"]["misses"] == 0
    assert [len(s) for s in d["family"]["dilate_sets"]] == [1, 2, 3]


def test_fourier_verbs(tmp_path):
    code, out = call("fourier", "instance", "--primes", "11", "--P", "1009", "--H", "1")
    assert code == 0 and json.loads(out)["A_sizes"] == [184]
    csv_path = tmp_path / "e.csv"
    code, out = call("fourier", "exceptional", "--primes", "11", "--P", "1009", "--csv-out", str(csv_path))
    assert json.loads(out)["E_fraction"] <= 0.2 and csv_path.exists()
    code, out = call("fourier", "verify", "--primes", "11", "--P", "1009", "--trials", "20")
    assert json.loads(out)["conclusion"]["rate"] >= 0.95
    code, out = call("fourier", "remark", "--r", "2", "--P", "1009")
    assert json.loads(out)["coordinatewise_hits"] == 0
    code, out = call("fourier", "lemma", "--random", "200", "--seed", "3")
    assert json.loads(out)["violations"] == 0
    code, out = call("fourier", "lemma", "--tightness", "3")
    assert len(json.loads(out)["tightness"]) == 3
    code, out = call("fourier", "lemma", "--coefficients", "1,-1", "--bases", "2,3", "--grid", "0.1,0.3,0.5,0.7")
    assert json.loads(out)["holds"]


def test_modulus_too_small_is_usage_error():
    # P = 101 < 11**2, so the digit set is undefined
    code, _ = call("fourier", "instance", "--primes", "11", "--P", "101")
    assert code == 1


def test_usage_errors():
    assert call("kummer", "--n", "5")[0] == 1
    with pytest.raises(SystemExit) as exc:
        run(["bogus"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        run(["search", "--primes", "3", "--limit", "abc"])
    assert exc.value.code == 1


def test_store_record_and_query(tmp_path):
    store = str(tmp_path / "s.ndjson")
    call("--store", store, "--record", "heuristic", "--primes", "3,5,7")
    call("heuristic", "--primes", "3,5,7", "--store", store, "--record")
    _, out = call("--store", store, "store", "query")
    recs = json.loads(out)["records"]
    assert len(recs) == 2
    assert recs[0]["fingerprint"] == recs[1]["fingerprint"]
    assert recs[0]["outputs"] == recs[1]["outputs"]
    _, out = call("--store", store, "store", "count", "--fingerprint", "f" * 64)
    assert json.loads(out)["count"] == 0


def test_console_script_and_module():
    out = subprocess.run([sys.executable, "-m", "centralbinom", "kummer", "--n", "10", "--prime", "7"], capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["valuation"] == 0


def test_determinism_bytes():
    a = call("fourier", "verify", "--primes", "11", "--P", "1009", "--trials", "10", "--seed", "7")[1]
    b = call("fourier", "verify", "--primes", "11", "--P", "1009", "--trials", "10", "--seed", "7")[1]
    assert a == b
