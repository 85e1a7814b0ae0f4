import os
import struct
import subprocess
from pathlib import Path

import numpy as np
import pytest

import moralscope as ms

FIXTURES = Path(os.environ.get("MORALSCOPE_FIXTURES", Path(__file__).resolve().parents[1] / "fixtures"))


def test_verdicts():
    assert ms.extract_verdict("NTA, your sister is out of line") == "NTA"
    assert ms.extract_verdict("I do not think YTA here") == "NTA"
    assert ms.extract_verdict("Honestly no idea") is None


def test_tokenize():
    assert ms.tokenize("Not cruel, kind.") == ["Not", "cruel", ",", "kind", "."]


def test_odds_ratio():
    r = ms.odds_ratio(10, 20, 5, 40)
    assert r.odds_ratio == pytest.approx(4.0)
    assert r.p_value == pytest.approx(0.0236, rel=0.01)
    assert not r.corrected
    assert ms.odds_ratio(0, 5, 5, 5).corrected


def test_ols_matches_numpy():
    rng = np.random.default_rng(3)
    X = np.column_stack([np.ones(40), rng.normal(size=40), rng.normal(size=40)])
    y = X @ np.array([1.0, 2.0, -0.5]) + rng.normal(scale=0.1, size=40)
    fit = ms.ols_fit(X, y, ["const", "a", "b"])
    ref, *_ = np.linalg.lstsq(X, y, rcond=None)
    assert np.allclose(fit.beta, ref, atol=1e-10)
    assert fit.names == ["const", "a", "b"]
    assert ms.p_band(fit.p_values[1]) == "<1e-4"
    with pytest.raises(ms.RankDeficientError):
        ms.ols_fit(np.column_stack([X, X[:, 1]]), y)


def test_static_embeddings_load():
    emb = ms.load_embeddings(FIXTURES / "pipeline" / "static.emb")
    assert emb["kind"] == "static"
    assert emb["vectors"].shape == (len(emb["words"]), emb["dim"])
    assert emb["vectors"].dtype == np.float32


def test_contextual_roundtrip(tmp_path):
    rows = np.arange(6, dtype=np.float32).reshape(3, 2)
    ident = b"c1"
    payload = b"EMB1" + struct.pack("<IBII", 1, 1, 2, 1) + struct.pack("<I", len(ident)) + ident
    payload += struct.pack("<I", 3) + rows.tobytes()
    (tmp_path / "ctx.emb").write_bytes(payload)
    emb = ms.load_embeddings(tmp_path / "ctx.emb")
    assert emb["kind"] == "contextual"
    assert np.array_equal(emb["records"]["c1"], rows)
    (tmp_path / "bad.emb").write_bytes(payload[:-4])
    with pytest.raises(ms.EmbeddingFormatError):
        ms.load_embeddings(tmp_path / "bad.emb")


def test_stage_order():
    assert ms.stages()[0] == "ingest"
    assert ms.stages()[-1] == "report"


def test_missing_config_exit_code(tmp_path):
    assert ms.run("ingest", tmp_path / "absent.toml") == 2


@pytest.mark.skipif("MORALSCOPE_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_help():
    out = subprocess.run([os.environ["MORALSCOPE_CLI"], "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "ingest" in out.stdout
