"""Smoke test for the hinge_ewa_py extension module.

Build and install the module first:

    pip install --no-build-isolation ./crates/python

then run `python python/smoke_test.py`.
"""

import json
import math
import os
import sys
import tempfile

import hinge_ewa_py as hw


def check(cond, msg):
    if not cond:
        print("FAIL:", msg)
        sys.exit(1)
    print("ok:", msg)


def main():
    data = hw.Dataset([[2.0, 1.0], [0.0, 1.0], [-1.0, 1.0], [1.0, 3.0]], [1, 1, -1, -1])
    beta = [1.0, -1.0]
    check((data.n, data.d) == (4, 2), "dataset shape")
    check(hw.zero_one_risk(beta, data) == 0.25, "zero-one risk")
    check(hw.hinge_risk(beta, data) == 0.5, "hinge risk")
    check(hw.zero_one_risk(beta, data) <= hw.hinge_risk(beta, data), "majorization")
    check(hw.predict(beta, [1.0, 1.0]) == 1.0, "tie predicts +1")
    check(hw.soft_threshold(3.0, 1.0) == 2.0, "soft threshold")
    check(abs(hw.log_prior([0.0, 0.0]) - 0.0) < 1e-12, "log prior at zero")

    post = hw.GibbsPosterior(data, lam=2.0, tau=1.0)
    g = post.gradient([0.3, -0.2])
    check(len(g) == 2 and all(math.isfinite(v) for v in g), "gradient is finite")
    chain = post.mala(0.5, n_iter=2000, burn_in=500, seed=7)
    check(0.0 <= chain.acceptance_rate <= 1.0, "acceptance rate in [0, 1]")
    again = post.mala(0.5, n_iter=2000, burn_in=500, seed=7)
    check(chain.posterior_mean() == again.posterior_mean(), "chains are reproducible")
    lmc = post.lmc(1e-3, n_iter=500, burn_in=100, seed=1)
    check(len(lmc) == 500, "lmc stores every iterate")

    train, test, beta_star = hw.simulate("I.1", n=50, d=100, s0=10, seed=3, test_size=500)
    check(hw.misclassification_rate(beta_star, test) == 0.0, "noiseless truth classifies perfectly")
    cv = hw.lasso_cv(train, seed=3)
    check(len(cv["beta"]) == 100 and cv["selected_penalty"] in cv["grid"], "lasso cv report")

    config = json.dumps({"n_iter": 2000, "burn_in": 500, "pilot_iters": 200})
    fit = hw.fit(train, method="h-mala", config=config, seed=1)
    check(len(fit["beta"]) == 100, "fit returns coefficients")
    rows = hw.bench(["I.1"], methods="h-lmc,lasso", reps=2, config=config)
    check([r["method"] for r in rows] == ["H_LMC", "Lasso"], "bench cells")

    check(hw.rate_bound(200, 1000, 10, 0.05, "fast") > 0.0, "rate bound")

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.csv")
        data.to_csv(path)
        back = hw.Dataset.from_csv(path)
        check(back.features == data.features and back.labels == data.labels, "csv round trip")

    try:
        hw.GibbsPosterior(data, lam=-1.0)
    except ValueError:
        check(True, "invalid lambda raises ValueError")
    else:
        check(False, "invalid lambda raises ValueError")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
