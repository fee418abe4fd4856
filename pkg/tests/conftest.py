import itertools
import math

import numpy as np
import pytest


def random_graph(n, p, rng):
    A = (rng.random((n, n)) < p).astype(float)
    A = np.triu(A, 1)
    return A + A.T


def random_symmetric(s, rng):
    B = rng.random((s, s))
    return (B + B.T) / 2


def brute_gw_cost(A, B, pi):
    """Direct quadruple sum: G[i, j] = sum_{k,l} |A[i,k] - B[j,l]| pi[k,l]."""
    N, S = pi.shape
    G = np.zeros((N, S))
    for i in range(N):
        for j in range(S):
            acc = 0.0
            for k in range(N):
                for l in range(S):
                    acc += abs(A[i, k] - B[j, l]) * pi[k, l]
            G[i, j] = acc
    return G


def brute_fgw_objective(M, A, B, pi, alpha):
    """sum_{i,k,j,l} [(1-alpha) M_ij + alpha |A_ik - B_jl|] pi_ij pi_kl, dense tensor form."""
    L = np.abs(A[:, :, None, None] - B[None, None, :, :])  # i, k, j, l
    quad = np.einsum("ikjl,ij,kl->", L, pi, pi)
    lin = np.einsum("ij,ij,kl->", M, pi, pi)
    return (1 - alpha) * lin + alpha * quad


def automorphism_count(A):
    n = len(A)
    return sum(np.array_equal(A, A[np.ix_(p, p)]) for p in itertools.permutations(range(n)))


def rigid_graph(n, rng):
    """Random graph on ``n`` nodes whose only automorphism is the identity."""
    while True:
        A = random_graph(n, rng.uniform(0.3, 0.6), rng)
        if automorphism_count(A) == 1:
            return A


def grid_couplings(mu, nu, step=0.05):
    """All N x 2 couplings with entries on a ``step`` grid and the given marginals."""
    assert len(nu) == 2
    levels = [np.round(np.arange(0, m + 1e-12, step), 10) for m in mu]
    for first in itertools.product(*levels):
        first = np.array(first)
        if abs(first.sum() - nu[0]) < 1e-9:
            yield np.stack([first, np.asarray(mu) - first], axis=1)


def exhaustive_mapping(pred, truth, C):
    """Best cluster->class permutation by enumeration: most matches, then
    largest F1 sum, then lexicographically first. Returns (perm, hits)."""
    pred, truth = list(pred), list(truth)
    best, best_key = None, None
    for perm in itertools.permutations(range(C)):
        mapped = [perm[p] for p in pred]
        hits = sum(1 for m, t in zip(mapped, truth) if m == t)
        f1_sum = 0.0
        for c in range(C):
            tp = sum(1 for m, t in zip(mapped, truth) if m == c and t == c)
            size = mapped.count(c) + truth.count(c)
            f1_sum += 2 * tp / size if size else 0.0
        if best is None or hits > best_key[0] or (hits == best_key[0] and f1_sum > best_key[1] + 1e-12):
            best, best_key = perm, (hits, f1_sum)
    return best, best_key[0]


def formula_metrics(pred, truth, C):
    """Scalar-loop reference for ACC, Macro-F1, NMI (arithmetic) and ARI."""
    n = len(pred)
    best_perm, best_hits = exhaustive_mapping(pred, truth, C)
    mapped = [best_perm[p] for p in pred]
    f1s = []
    for c in range(C):
        tp = sum(1 for m, t in zip(mapped, truth) if m == c and t == c)
        npred = sum(1 for m in mapped if m == c)
        ntrue = sum(1 for t in truth if t == c)
        prec = tp / npred if npred else 0.0
        rec = tp / ntrue if ntrue else 0.0
        f1s.append(2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0)

    def H(labels):
        out = 0.0
        for v in set(labels):
            p = labels.count(v) / n
            out -= p * math.log(p)
        return out

    pl, tl = list(pred), list(truth)
    mi = 0.0
    for a in set(pl):
        for b in set(tl):
            nab = sum(1 for x, y in zip(pl, tl) if x == a and y == b)
            if nab:
                mi += nab / n * math.log(n * nab / (pl.count(a) * tl.count(b)))
    hp, ht = H(pl), H(tl)
    nmi = 1.0 if hp == 0 and ht == 0 else mi / ((hp + ht) / 2)

    # pair counting over all unordered pairs
    same_both = same_p = same_t = 0
    for i in range(n):
        for j in range(i + 1, n):
            sp_, st_ = pl[i] == pl[j], tl[i] == tl[j]
            same_both += sp_ and st_
            same_p += sp_
            same_t += st_
    pairs = n * (n - 1) / 2
    expected = same_p * same_t / pairs if pairs else 0.0
    top = (same_p + same_t) / 2
    ari = 1.0 if top == expected else (same_both - expected) / (top - expected)
    return {"acc": best_hits / n, "macro_f1": sum(f1s) / C, "nmi": nmi, "ari": ari}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_RESULTS = {}


def record_acceptance(number, title, passed, detail=""):
    ACCEPTANCE_RESULTS[number] = (title, passed, detail)
    print(f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'} - {title} {detail}".rstrip())
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  {detail}".rstrip())
