"""Numba kernels for affine-gap global alignment and k-mer counting.

Sequences are ``uint8`` arrays of alphabet indices (0-19).  Alignment states
are coded 0 = diagonal, 1 = gap in b (a symbol against '-'), 2 = gap in a.
"""

import numpy as np
from numba import njit

NEG = np.int32(-(1 << 29))

OP_DIAG = 0
OP_GAP_B = 1
OP_GAP_A = 2


@njit(cache=True)
def _banded_gotoh(a, b, match, mismatch, gap_open, gap_extend, lo, hi, ops):
    m = a.shape[0]
    n = b.shape[0]
    width = hi - lo + 1
    # rolling rows padded by one column on each side; band column k lives at k + 1
    Hp = np.full(width + 2, NEG, np.int32)
    Ep = np.full(width + 2, NEG, np.int32)
    Fp = np.full(width + 2, NEG, np.int32)
    Hc = np.full(width + 2, NEG, np.int32)
    Ec = np.full(width + 2, NEG, np.int32)
    Fc = np.full(width + 2, NEG, np.int32)
    T = np.zeros((m + 1, width), np.uint8)

    for j in range(max(0, lo), min(n, hi) + 1):
        k = j - lo + 1
        if j == 0:
            Hp[k] = 0
        else:
            Fp[k] = gap_open + (j - 1) * gap_extend
            if j > 1:
                T[0, k - 1] = 2 << 4
    for i in range(1, m + 1):
        jlo = max(0, i + lo)
        jhi = min(n, i + hi)
        ai = a[i - 1]
        # only cells outside this row's span can hold stale values
        for kk in range(0, jlo - i - lo + 1):
            Hc[kk] = NEG
            Ec[kk] = NEG
            Fc[kk] = NEG
        for kk in range(jhi - i - lo + 2, width + 2):
            Hc[kk] = NEG
            Ec[kk] = NEG
            Fc[kk] = NEG
        Ti = T[i]
        j = jlo
        if j == 0:
            k = j - i - lo + 1
            Ec[k] = gap_open + (i - 1) * gap_extend
            if i > 1:
                Ti[k - 1] = 1 << 2
            j = 1
        for j in range(j, jhi + 1):
            k = j - i - lo + 1
            # diagonal predecessor (i-1, j-1) shares band column k
            best = Hp[k]
            tb = 0
            if Ep[k] > best:
                best = Ep[k]
                tb = 1
            if Fp[k] > best:
                best = Fp[k]
                tb = 2
            if ai == b[j - 1]:
                Hc[k] = best + match
            else:
                Hc[k] = best + mismatch
            # vertical predecessor (i-1, j) is band column k + 1
            best = Hp[k + 1] + gap_open
            s = 0
            v = Ep[k + 1] + gap_extend
            if v > best:
                best = v
                s = 1
            v = Fp[k + 1] + gap_open
            if v > best:
                best = v
                s = 2
            Ec[k] = best
            tb |= s << 2
            # horizontal predecessor (i, j-1) is band column k - 1
            best = Hc[k - 1] + gap_open
            s = 0
            v = Ec[k - 1] + gap_open
            if v > best:
                best = v
                s = 1
            v = Fc[k - 1] + gap_extend
            if v > best:
                best = v
                s = 2
            Fc[k] = best
            tb |= s << 4
            Ti[k - 1] = tb
        Hp, Hc = Hc, Hp
        Ep, Ec = Ec, Ep
        Fp, Fc = Fc, Fp

    k = n - m - lo + 1
    score = Hp[k]
    state = 0
    if Ep[k] > score:
        score = Ep[k]
        state = 1
    if Fp[k] > score:
        score = Fp[k]
        state = 2

    i = m
    j = n
    identical = 0
    length = 0
    gaps = 0
    while i > 0 or j > 0:
        tb = T[i, j - i - lo]
        ops[length] = state
        length += 1
        if state == 0:
            if a[i - 1] == b[j - 1]:
                identical += 1
            state = tb & 3
            i -= 1
            j -= 1
        elif state == 1:
            gaps += 1
            state = (tb >> 2) & 3
            i -= 1
        else:
            gaps += 1
            state = (tb >> 4) & 3
            j -= 1
    return score, identical, length, gaps


@njit(cache=True)
def _single_gap_score(a, b, match, mismatch, gap_open, gap_extend):
    """Best score over alignments with at most one gap run (a cheap lower bound)."""
    m = a.shape[0]
    n = b.shape[0]
    e = n - m
    g = abs(e)
    gap_cost = 0
    if g > 0:
        gap_cost = gap_open + (g - 1) * gap_extend
    short = min(m, n)
    # prefix[p]: diagonal score of the first p columns at offset 0
    prefix = np.zeros(short + 1, np.int64)
    for p in range(short):
        prefix[p + 1] = prefix[p] + (match if a[p] == b[p] else mismatch)
    # suffix[p]: diagonal score of columns p.. at the end-anchored offset
    suffix = np.zeros(short + 1, np.int64)
    for p in range(short - 1, -1, -1):
        if e >= 0:
            x = a[p]
            y = b[p + e]
        else:
            x = a[p - e]
            y = b[p]
        suffix[p] = suffix[p + 1] + (match if x == y else mismatch)
    best = prefix[0] + suffix[0]
    for p in range(short + 1):
        v = prefix[p] + suffix[p]
        if v > best:
            best = v
    return best + gap_cost


@njit(cache=True)
def _outside_band_bound(m, n, lo, hi, overlap, match, mismatch, gap_open, gap_extend):
    """Upper bound on the score of any path leaving the band ``lo..hi``."""
    e = n - m
    g = 1 << 30
    if hi < n:
        g = min(g, 2 * (hi + 1) - e)
    if lo > -m:
        g = min(g, e - 2 * (lo - 1))
    if g >= (1 << 30):
        return -1.0e18
    best = -1.0e18
    g_star = max(g, m + n - 2 * overlap)
    for gg in (g, g_star):
        d = (m + n - gg) / 2.0
        if d < 0:
            continue
        ident = min(d, overlap)
        val = match * ident + mismatch * (d - ident) + gap_open + (gg - 1) * gap_extend
        if val > best:
            best = val
    return best


@njit(cache=True)
def _overlap(a, b):
    ca = np.zeros(20, np.int64)
    cb = np.zeros(20, np.int64)
    for x in a:
        ca[x] += 1
    for x in b:
        cb[x] += 1
    s = 0
    for c in range(20):
        s += min(ca[c], cb[c])
    return s


@njit(cache=True)
def gotoh(a, b, match, mismatch, gap_open, gap_extend, banded, ops):
    """Optimal global alignment; returns (score, identical, length, gaps).

    The traceback op codes are written to ``ops`` in reverse column order.
    With ``banded`` set, the band is sized so that no path leaving it can
    reach a score already known to be attainable; the result then equals
    the full DP, tie-breaking included.
    """
    m = a.shape[0]
    n = b.shape[0]
    e = n - m
    if banded:
        floor_score = _single_gap_score(a, b, match, mismatch, gap_open, gap_extend)
        overlap = _overlap(a, b)
        w = 1
        while True:
            lo = min(0, e) - w
            hi = max(0, e) + w
            if (lo <= -m and hi >= n) or 3 * (hi - lo + 1) >= 2 * (n + 1):
                break
            if _outside_band_bound(m, n, lo, hi, overlap, match, mismatch,
                                   gap_open, gap_extend) < floor_score:
                return _banded_gotoh(a, b, match, mismatch, gap_open, gap_extend, lo, hi, ops)
            w += 1
    return _banded_gotoh(a, b, match, mismatch, gap_open, gap_extend, -m, n, ops)


@njit(cache=True)
def kmer_codes(seq, k):
    """Sorted integer codes of every length-k word of ``seq``."""
    n = seq.shape[0] - k + 1
    if n <= 0:
        return np.empty(0, np.int64)
    out = np.empty(n, np.int64)
    code = 0
    mod = 20 ** (k - 1)
    for i in range(k):
        code = code * 20 + seq[i]
    out[0] = code
    for i in range(1, n):
        code = (code - seq[i - 1] * mod) * 20 + seq[i + k - 1]
        out[i] = code
    out.sort()
    return out


@njit(cache=True)
def shared_count(x, y):
    """Size of the multiset intersection of two sorted code arrays."""
    i = 0
    j = 0
    s = 0
    while i < x.shape[0] and j < y.shape[0]:
        if x[i] == y[j]:
            s += 1
            i += 1
            j += 1
        elif x[i] < y[j]:
            i += 1
        else:
            j += 1
    return s


@njit(cache=True)
def shared_counts_flat(q, flat, starts, ends, out):
    """``shared_count`` of ``q`` against each slice ``flat[starts[i]:ends[i]]``."""
    for r in range(starts.shape[0]):
        out[r] = shared_count(q, flat[starts[r]:ends[r]])


@njit(cache=True)
def overlaps_flat(qhist, hists, out):
    for r in range(hists.shape[0]):
        s = 0
        for c in range(20):
            s += min(qhist[c], hists[r, c])
        out[r] = s


@njit(cache=True)
def lcs_length(a, b):
    """Longest common subsequence length, bit-parallel over ``a``.

    No alignment has more identical columns than this, so it bounds
    similarity from above at a fraction of the cost of the DP.
    """
    m = a.shape[0]
    words = (m + 63) >> 6
    pm = np.zeros((20, words), np.uint64)
    for i in range(m):
        pm[a[i], i >> 6] |= np.uint64(1) << np.uint64(i & 63)
    v = np.full(words, ~np.uint64(0), np.uint64)
    one = np.uint64(1)
    for j in range(b.shape[0]):
        row = pm[b[j]]
        carry = np.uint64(0)
        for w in range(words):
            x = v[w]
            u = x & row[w]
            s = x + u
            c1 = s < x
            t = s + carry
            c2 = t < s
            carry = one if (c1 or c2) else np.uint64(0)
            v[w] = t | (x & ~u)
    zeros = 0
    for w in range(words):
        x = ~v[w]
        if w == words - 1 and (m & 63):
            x &= (one << np.uint64(m & 63)) - one
        while x:
            x &= x - one
            zeros += 1
    return zeros


# ---------------------------------------------------------------------------
# inverted k-mer index: open-addressing table of word -> linked posting list


@njit(cache=True)
def distinct_counts(words):
    """Distinct values of a sorted array and their multiplicities."""
    n = words.shape[0]
    uniq = np.empty(n, np.int64)
    counts = np.empty(n, np.int64)
    d = 0
    for i in range(n):
        if d > 0 and uniq[d - 1] == words[i]:
            counts[d - 1] += 1
        else:
            uniq[d] = words[i]
            counts[d] = 1
            d += 1
    return uniq[:d], counts[:d]


@njit(cache=True)
def _probe(keys, w):
    mask = keys.shape[0] - 1
    h = (w * -7046029254386353131) >> 17
    h &= mask
    while keys[h] != -1 and keys[h] != w:
        h = (h + 1) & mask
    return h


@njit(cache=True)
def postings_insert(keys, heads, plens, ent_rep, ent_next, nent, words_u, rep):
    """Add ``rep`` to the posting list of every word in ``words_u``.

    The caller guarantees spare capacity; returns (new keys, new entry count).
    """
    added = 0
    for w in words_u:
        h = _probe(keys, w)
        if keys[h] == -1:
            keys[h] = w
            heads[h] = -1
            plens[h] = 0
            added += 1
        ent_rep[nent] = rep
        ent_next[nent] = heads[h]
        heads[h] = nent
        plens[h] += 1
        nent += 1
    return added, nent


@njit(cache=True)
def postings_rehash(keys, heads, plens, size):
    nk = np.full(size, -1, np.int64)
    nh = np.empty(size, np.int64)
    npl = np.zeros(size, np.int64)
    for s in range(keys.shape[0]):
        if keys[s] != -1:
            h = _probe(nk, keys[s])
            nk[h] = keys[s]
            nh[h] = heads[s]
            npl[h] = plens[s]
    return nk, nh, npl


@njit(cache=True)
def postings_candidates(keys, heads, plens, ent_rep, ent_next, words_u, counts_u, need, lo, hi,
                        max_work, acc, out):
    """Representatives in ``lo..hi-1`` that may share ``need`` words with the query.

    The most widespread query words are set aside while their total count
    stays below ``need``; a representative found in none of the remaining
    posting lists shares fewer than ``need`` words.  Writes ascending ids to
    ``out`` and returns their number, or -1 when walking the remaining lists
    would cost more than ``max_work`` entries.
    """
    d = words_u.shape[0]
    slots = np.empty(d, np.int64)
    lens = np.zeros(d, np.int64)
    for t in range(d):
        h = _probe(keys, words_u[t])
        slots[t] = h
        if keys[h] != -1:
            lens[t] = plens[h]
    order = np.argsort(-lens)
    rare = np.ones(d, np.bool_)
    set_aside = 0
    for t in order:
        if set_aside + counts_u[t] <= need - 1:
            set_aside += counts_u[t]
            rare[t] = False
    work = 0
    for t in range(d):
        if rare[t]:
            work += lens[t]
    if work > max_work:
        return -1
    touched = np.empty(work, np.int64)
    nt = 0
    for t in range(d):
        if not rare[t] or lens[t] == 0:
            continue
        e = heads[slots[t]]
        c = counts_u[t]
        while e != -1:
            r = ent_rep[e]
            if lo <= r < hi:
                if acc[r] == 0:
                    touched[nt] = r
                    nt += 1
                acc[r] += c
            e = ent_next[e]
    n = 0
    for i in range(nt):
        r = touched[i]
        if acc[r] + set_aside >= need:
            out[n] = r
            n += 1
        acc[r] = 0
    out[:n].sort()
    return n


@njit(cache=True)
def required_words(length, x, k):
    """Shared-word floor at identity ``x`` (slack already subtracted)."""
    if x <= 0.0:
        return -(1 << 62)
    per_break = max(float(k), (k - 1) / x)
    return (length - k + 1) - np.int64(np.floor((1.0 - x) * length * per_break + 1e-9))


@njit(cache=True)
def scan_representatives(q, q_src, order, shared, overlap, codes, code_starts, lengths, sources,
                         threshold, slack, k, prefilter, best_match, banded, scheme, cache,
                         best, ops, counters):
    """Evaluate a query against representatives ``order`` in turn.

    ``best`` holds ``(rep, identical, length)`` of the incumbent winner (rep
    -1 for none) and is updated in place; returns True when a first-match run
    may stop.  ``cache`` maps ``q_src << 32 | rep_src`` to
    ``identical << 32 | length``.  ``counters`` accumulates alignments and
    common-subsequence skips.
    """
    n = q.shape[0]
    for pos in range(order.shape[0]):
        r = order[pos]
        L = lengths[r]
        short = min(n, L)
        long_ = max(n, L)
        floor = -1.0
        if prefilter:
            bar = threshold
            if best[0] >= 0:
                bar = max(threshold, best[1] / best[2])
            if short >= k:
                need = max(required_words(short, bar - slack, k), required_words(long_, bar - slack, k))
                if shared[pos] < need:
                    continue
            floor = (bar - slack) * long_
            if overlap[pos] < floor:
                continue
        key = (np.int64(q_src) << 32) | np.int64(sources[r])
        packed = cache.get(key, np.int64(-1))
        if packed >= 0:
            identical = packed >> 32
            length = packed & 0xFFFFFFFF
        else:
            b = codes[code_starts[r]:code_starts[r] + L]
            if prefilter and lcs_length(q, b) < floor:
                counters[1] += 1
                continue
            _, identical, length, _ = gotoh(q, b, scheme[0], scheme[1], scheme[2], scheme[3], banded, ops)
            counters[0] += 1
            cache[key] = (np.int64(identical) << 32) | np.int64(length)
        if identical < (threshold - slack) * length or length < short or length < (threshold - slack) * long_:
            continue
        if not best_match:
            best[0], best[1], best[2] = r, identical, length
            return True
        if best[0] < 0:
            best[0], best[1], best[2] = r, identical, length
            continue
        lhs = identical * best[2]
        rhs = best[1] * length
        if lhs > rhs or (lhs == rhs and r < best[0]):
            best[0], best[1], best[2] = r, identical, length
    return False
