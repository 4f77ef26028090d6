"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Both implementations perform the same floating-point operations in the same
order, so their results are bit-identical; the test suite checks this.
"""

from __future__ import annotations


def dense_probs(vocab_size, total, smoothing, ids, counts):
    """Additively smoothed next-token distribution over the whole vocabulary."""
    denom = total + smoothing * vocab_size
    if denom <= 0:
        return [1.0 / vocab_size] * vocab_size
    out = [smoothing / denom] * vocab_size
    for tok, c in zip(ids, counts):
        out[tok] = (c + smoothing) / denom
    return out


def pick_token(probs, temperature, top_p, u, do_sample):
    """Choose the next token and return ``(token_id, probability)``.

    Greedy picks the lowest-id argmax and reports its raw probability.
    Sampling sharpens by ``1/temperature``, keeps the smallest
    probability-ranked prefix reaching ``top_p`` (ties by id), renormalizes,
    and inverts the uniform draw ``u``; the reported probability is the
    renormalized one the draw used.
    """
    n = len(probs)
    if not do_sample:
        best = 0
        for i in range(1, n):
            if probs[i] > probs[best]:
                best = i
        return best, float(probs[best])

    if temperature == 1.0:
        w = [float(p) for p in probs]
    else:
        inv = 1.0 / temperature
        w = [p ** inv for p in probs]
    z = 0.0
    for x in w:
        z += x
    q = [x / z for x in w]

    order = sorted(range(n), key=lambda i: (-q[i], i))
    kept = []
    cum = 0.0
    for i in order:
        if q[i] <= 0.0:
            break
        kept.append(i)
        cum += q[i]
        if cum >= top_p:
            break

    target = u * cum
    acc = 0.0
    chosen = kept[-1]
    for i in kept:
        acc += q[i]
        if acc > target:
            chosen = i
            break
    return chosen, q[chosen] / cum
