"""Spot-check analytic gradients against central finite differences.

Every backward pass in the package is hand-written, so this demo re-derives
a handful of them numerically and prints the worst relative error seen for
each primitive.  Anything above ~1e-6 would indicate a broken derivative
(the test suite enforces 1e-4 across hundreds of random shapes; this is the
human-readable version of the same check).

Run:  python3 demos/check_gradients.py
"""

import numpy as np

from marppo.nn import Dense, LstmCell
from marppo.policy import categorical_backward, categorical_logp_entropy
from marppo.trainer import actor_loss, actor_loss_grads


def fd_grad(loss_fn, arr, h=1e-6):
    """Central finite differences of a scalar loss with respect to ``arr``."""
    g = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_fn()
        flat[i] = keep - h
        dn = loss_fn()
        flat[i] = keep
        gflat[i] = (up - dn) / (2.0 * h)
    return g


def rel_err(a, b, floor=1e-8):
    return float(np.max(np.abs(a - b) / np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))))


def check_dense(rng):
    layer = Dense("d", 4, 3, rng)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 3))  # fixed projection making the output a scalar

    def loss():
        y, _ = layer.forward(x)
        return float((y * w).sum())

    y, cache = layer.forward(x)
    dx = layer.backward(w, cache)
    errs = [rel_err(dx, fd_grad(loss, x))]
    for blk in layer.blocks:
        blk.zero_grad()
    layer.backward(w, cache)
    for blk in layer.blocks:
        errs.append(rel_err(blk.grads, fd_grad(loss, blk.weights)))
    return max(errs)


def check_lstm(rng):
    cell = LstmCell("l", 3, 4, rng)
    x = rng.normal(size=(2, 3))
    h0 = rng.normal(size=(2, 4))
    c0 = rng.normal(size=(2, 4))
    wh = rng.normal(size=(2, 4))
    wc = rng.normal(size=(2, 4))

    def loss():
        h, c, _ = cell.forward(x, h0, c0)
        return float((h * wh).sum() + (c * wc).sum())

    h, c, cache = cell.forward(x, h0, c0)
    dx, dh0, dc0 = cell.backward(wh, wc, cache)
    errs = [rel_err(dx, fd_grad(loss, x)),
            rel_err(dh0, fd_grad(loss, h0)),
            rel_err(dc0, fd_grad(loss, c0))]
    for blk in cell.blocks:
        blk.zero_grad()
    cell.backward(wh, wc, cache)
    for blk in cell.blocks:
        errs.append(rel_err(blk.grads, fd_grad(loss, blk.weights)))
    return max(errs)


def check_categorical(rng):
    logits = rng.normal(size=(6, 5))
    actions = rng.integers(0, 5, size=6)
    wl = rng.normal(size=6)
    we = rng.normal(size=6)

    def loss():
        lp, ent, _ = categorical_logp_entropy(logits, actions)
        return float((lp * wl).sum() + (ent * we).sum())

    _, _, cache = categorical_logp_entropy(logits, actions)
    dlogits = categorical_backward(cache, wl, we)
    return rel_err(dlogits, fd_grad(loss, logits))


def check_surrogate(rng):
    # stay away from the clip kinks so finite differences are valid
    adv = rng.normal(size=8)
    old = rng.normal(size=8) * 0.1
    new = old + rng.uniform(0.02, 0.05, size=8) * rng.choice([-1.0, 1.0], size=8)
    ent = rng.normal(size=8) * 0.01

    def loss():
        return actor_loss(new, old, adv, ent, 0.2, 0.01)

    _, dlogp, dent, _, _ = actor_loss_grads(new, old, adv, ent, 0.2, 0.01)
    return max(rel_err(dlogp, fd_grad(loss, new)), rel_err(dent, fd_grad(loss, ent)))


def main():
    rng = np.random.default_rng(7)
    checks = [
        ("dense layer        ", check_dense),
        ("lstm cell          ", check_lstm),
        ("categorical head   ", check_categorical),
        ("clipped surrogate  ", check_surrogate),
    ]
    print("worst relative error, analytic gradient vs central differences:")
    ok = True
    for name, fn in checks:
        worst = max(fn(rng) for _ in range(5))
        ok = ok and worst < 1e-6
        print(f"  {name} {worst:.3e}")
    print("all gradients agree" if ok else "MISMATCH - see above")


if __name__ == "__main__":
    main()
