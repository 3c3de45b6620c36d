"""Smoke test for the brlab extension module. Run after installing crates/python."""

import json

import brlab


def close(a, b, tol):
    return abs(a - b) <= tol


def check_families():
    w = brlab.w_state(4)
    assert w.shape == [2, 2, 2, 2]
    assert close(w.get([0, 0, 0, 1]).real, 1.0, 1e-15)
    assert close(w.frobenius_norm(), 2.0, 1e-12)

    dec = brlab.family("w-unconstrained", 4, 1e-3)
    assert dec.kind == "unconstrained" and dec.r == 2
    assert dec.validate() == []
    err = dec.contract().distance(w)
    assert err < 1e-2

    study = brlab.convergence_study("w-psd", 5)
    assert len(study["points"]) == 13
    assert close(study["slope"], 1.25, 0.05), study["slope"]


def check_ranks():
    w = brlab.w_state(3)
    assert brlab.flattening_lower_bound(w) == 2
    report = brlab.rank_report(w, [2, 3], seed=5, starts=4, iters=500, label="W3")
    residuals = {row["r"]: row["residual"] for row in report["residuals"]}
    assert residuals[3] < 1e-6, residuals
    assert brlab.reference_lookup("border_rank", 7)["value"] == 2
    assert any(e["quantity"] == "rank" for e in brlab.reference_ranks())


def check_models():
    complex_ = brlab.Complex.cycle(3)
    dec = brlab.Decomposition.random("psd", complex_, 2, 2, seed=11, action="cyclic")
    model = brlab.to_model(dec)
    report = brlab.model_report(model)
    assert report["valid"], report
    p = brlab.eval_model(model)
    total = sum(x.real for x in p.data())
    assert close(total, 1.0, 1e-10)
    back = brlab.from_model(model)
    assert back.kind == "psd"
    assert back.contract().distance(p) < 1e-10

    hvm = json.dumps({"prior": [0.25, 0.75], "conditionals": [[[0.5, 0.5], [0.1, 0.9]]] * 3})
    nn = brlab.from_model(hvm)
    assert nn.kind == "nonnegative"
    q = brlab.eval_model(hvm)
    assert close(q.get([1, 1, 1]).real, 0.25 * 0.125 + 0.75 * 0.729, 1e-12)
    assert nn.contract().distance(q) < 1e-12
    assert json.loads(brlab.to_model(nn))["prior"] == [0.25, 0.75]


def check_trees():
    line = brlab.Complex.line(4)
    assert line.is_tree()
    dec = brlab.Decomposition.random("unconstrained", line, 2, 2, seed=9)
    canon, deviation = brlab.left_canonical(dec)
    assert deviation < 1e-10
    assert canon.contract().distance(dec.contract()) <= 1e-10 * dec.contract().frobenius_norm()

    sep = brlab.Decomposition.random("separable", line, 2, 2, seed=9)
    normalized, pruned = brlab.normalize_separable_tree(sep)
    assert pruned == []
    dims, before = sep.density_matrix()
    _, after = normalized.density_matrix()
    diff = max(abs(a - b) for ra, rb in zip(before, after) for a, b in zip(ra, rb))
    assert dims == [2, 2, 2, 2] and diff < 1e-10

    report, limit = brlab.closure_check([dec, canon, canon])
    assert report["bounded"] and limit.kind == "unconstrained"

    try:
        brlab.left_canonical(brlab.Decomposition.random("unconstrained", brlab.Complex.cycle(4), 2, 2, seed=1))
    except brlab.BrlabError:
        pass
    else:
        raise AssertionError("cycle accepted as a tree")


def main():
    check_families()
    check_ranks()
    check_models()
    check_trees()
    print(f"brlab {brlab.__version__} smoke test ok")


if __name__ == "__main__":
    main()
