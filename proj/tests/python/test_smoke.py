import math
import os
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, special, stats

import skgc

ROOT = Path(os.environ.get("SKGC_SOURCE_DIR", Path(__file__).resolve().parents[2]))
UMLS = ROOT / "data" / "umls"


def test_digamma_matches_scipy():
    for x in [0.1, 0.5, 1.0, 3.7, 42.0]:
        assert skgc.digamma(x) == pytest.approx(special.digamma(x), rel=1e-12)


@pytest.mark.parametrize("q,p", [((2.0, 3.0), (1.0, 5.0)), ((0.7, 1.4), (2.0, 2.0)), ((5.0, 0.5), (1.0, 1.0))])
def test_kl_beta_matches_quadrature(q, p):
    qd, pd = stats.beta(*q), stats.beta(*p)
    ref, _ = integrate.quad(lambda x: qd.pdf(x) * (qd.logpdf(x) - pd.logpdf(x)), 0, 1, limit=200)
    assert skgc.kl_beta(*q, *p) == pytest.approx(ref, abs=1e-6)


def test_kl_gaussian_examples():
    assert skgc.kl_gaussian(1.0, 1.0) == pytest.approx(0.5)
    assert skgc.kl_gaussian(0.0, 2.0, 0.0, 2.0) == 0.0


def test_stick_breaking_products():
    v = np.array([0.5, 0.4, 0.9])
    assert np.allclose(skgc.stick_breaking(v), np.cumprod(v))


def test_prior_mean_active():
    z = skgc.sample_prior(5.0, 128, 20000, seed=3)
    assert z.shape == (20000, 128)
    assert set(np.unique(z)) <= {0.0, 1.0}
    active = z.sum(axis=1)
    se = active.std(ddof=1) / math.sqrt(len(active))
    assert abs(active.mean() - skgc.expected_active_communities(5.0, 128)) < 4 * se


def test_rank_query_ties_and_filter():
    scores = np.array([0.9, 0.5, 0.5, 0.1])
    assert skgc.rank_query(1, scores) == 3
    assert skgc.rank_query(1, scores, [0]) == 2


@pytest.mark.skipif(not UMLS.exists(), reason="UMLS not present")
def test_umls_pipeline(tmp_path):
    stats_ = skgc.dataset_stats(str(UMLS))
    assert (stats_["entities"], stats_["relations"], stats_["train"]) == (135, 46, 5216)

    overrides = {"train.epochs": "1", "data.path": str(UMLS)}
    out = skgc.train(str(ROOT / "configs" / "umls.cfg"), overrides, str(tmp_path / "run"))
    assert out["test"]["average"]["count"] == 1322
    assert 0.0 < out["test"]["average"]["mrr"] <= 1.0

    again = skgc.evaluate(str(tmp_path / "run" / "checkpoints" / "best.ckpt"))
    assert again["average"] == out["test"]["average"]

    with pytest.raises(skgc.ConfigError):
        skgc.train(str(ROOT / "configs" / "umls.cfg"), {"train.no_such_key": "1"})
