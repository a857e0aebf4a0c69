"""Node-pool octree kernels.

Nodes live in flat arrays. ``child[n]`` is the index of the first of eight
consecutive children, or -1 for a leaf. A leaf at level ``L`` stands for a
homogeneous cube of ``2**L`` finest voxels per side. Octant bits are
``x | y << 1 | z << 2``, matching the Morton interleave used for updates.

Caches ``fmin``/``fmax`` bound the occupancy log-odds ``mean * weight`` over
observed descendants (``+inf``/``-inf`` when none are observed); ``allobs``
is true when every descendant voxel is observed.
"""

import numpy as np
from numba import njit

from ._kernels import fuse_scalar

# state[0]: nodes in use, state[1]: free blocks on the stack
USED = 0
NFREE = 1


@njit(cache=True)
def morton_encode(x, y, z, bits):
    code = np.int64(0)
    for b in range(bits):
        code |= ((x >> b) & 1) << (3 * b)
        code |= ((y >> b) & 1) << (3 * b + 1)
        code |= ((z >> b) & 1) << (3 * b + 2)
    return code


@njit(cache=True)
def morton_decode(code, bits):
    x = np.int64(0)
    y = np.int64(0)
    z = np.int64(0)
    for b in range(bits):
        x |= ((code >> (3 * b)) & 1) << b
        y |= ((code >> (3 * b + 1)) & 1) << b
        z |= ((code >> (3 * b + 2)) & 1) << b
    return x, y, z


@njit(cache=True)
def linear_to_morton(vox, size, bits):
    out = np.empty(vox.size, dtype=np.int64)
    for i in range(vox.size):
        v = vox[i]
        z = v % size
        y = (v // size) % size
        x = v // (size * size)
        out[i] = morton_encode(x, y, z, bits)
    return out


@njit(cache=True)
def build_pyramid(codes, samples, depth):
    """Lift complete sibling groups with identical samples to coarser levels.

    ``codes`` must be sorted finest-level Morton codes. Returns
    ``(codes, levels, samples)`` describing the same per-voxel updates with
    as few nodes as possible.
    """
    n = codes.size
    out_c = np.empty(n, dtype=np.int64)
    out_l = np.empty(n, dtype=np.int64)
    out_s = np.empty(n)
    m = 0
    cur_c = codes.copy()
    cur_s = samples.copy()
    level = 0
    while cur_c.size > 0:
        nxt_c = np.empty(cur_c.size // 8 + 1, dtype=np.int64)
        nxt_s = np.empty(cur_c.size // 8 + 1)
        k = 0
        i = 0
        nc = cur_c.size
        while i < nc:
            parent = cur_c[i] >> 3
            j = i + 1
            same = True
            while j < nc and (cur_c[j] >> 3) == parent:
                if cur_s[j] != cur_s[i]:
                    same = False
                j += 1
            if j - i == 8 and same and level < depth:
                nxt_c[k] = parent
                nxt_s[k] = cur_s[i]
                k += 1
            else:
                for q in range(i, j):
                    out_c[m] = cur_c[q]
                    out_l[m] = level
                    out_s[m] = cur_s[q]
                    m += 1
            i = j
        cur_c = nxt_c[:k]
        cur_s = nxt_s[:k]
        level += 1
    return out_c[:m], out_l[:m], out_s[:m]


@njit(cache=True)
def _split(node, child, mean, weight, dirty, free_blocks, state):
    if state[NFREE] > 0:
        state[NFREE] -= 1
        first = free_blocks[state[NFREE]]
    else:
        first = state[USED]
        state[USED] += 8
    for k in range(8):
        c = first + k
        child[c] = -1
        mean[c] = mean[node]
        weight[c] = weight[node]
        dirty[c] = 1
    child[node] = first


@njit(cache=True)
def _fuse_subtree(node, sample, child, mean, weight, dirty, stack, l_min, l_max, max_weight):
    top = 0
    stack[top] = node
    top += 1
    while top > 0:
        top -= 1
        n = stack[top]
        dirty[n] = 1
        if child[n] < 0:
            m, w = fuse_scalar(mean[n], weight[n], sample, l_min, l_max, max_weight)
            mean[n] = m
            weight[n] = w
        else:
            for k in range(8):
                stack[top] = child[n] + k
                top += 1


@njit(cache=True)
def apply_updates(child, mean, weight, dirty, free_blocks, state,
                  codes, levels, samples, start, depth, l_min, l_max, max_weight):
    """Fuse ``samples`` into the nodes addressed by ``(codes, levels)``.

    Stops early when the pool might run out of room; returns the index of the
    first unprocessed update so the caller can grow the pool and resume.
    """
    cap = child.shape[0]
    stack = np.empty(8 * depth + 8, dtype=np.int64)
    i = start
    while i < codes.size:
        if cap - state[USED] < 8 * (depth + 1) and state[NFREE] < depth + 1:
            return i
        code = codes[i]
        lvl = levels[i]
        node = 0
        dirty[0] = 1
        for level in range(depth, lvl, -1):
            if child[node] < 0:
                _split(node, child, mean, weight, dirty, free_blocks, state)
            octant = (code >> (3 * (level - 1 - lvl))) & 7
            node = child[node] + octant
            dirty[node] = 1
        _fuse_subtree(node, samples[i], child, mean, weight, dirty, stack, l_min, l_max, max_weight)
        i += 1
    return i


@njit(cache=True)
def _leaf_cache(n, mean, weight, fmin, fmax, allobs):
    if weight[n] > 0:
        f = mean[n] * weight[n]
        fmin[n] = f
        fmax[n] = f
        allobs[n] = True
    else:
        fmin[n] = np.inf
        fmax[n] = -np.inf
        allobs[n] = False


@njit(cache=True)
def refresh(child, mean, weight, fmin, fmax, allobs, dirty, free_blocks, state, depth):
    """Recompute caches of dirty nodes bottom-up and merge uniform siblings."""
    stack = np.empty(8 * depth + 16, dtype=np.int64)
    phase = np.empty(8 * depth + 16, dtype=np.int8)
    top = 0
    stack[0] = 0
    phase[0] = 0
    top = 1
    while top > 0:
        top -= 1
        n = stack[top]
        p = phase[top]
        if p == 0:
            if dirty[n] == 0:
                continue
            if child[n] < 0:
                _leaf_cache(n, mean, weight, fmin, fmax, allobs)
                dirty[n] = 0
                continue
            stack[top] = n
            phase[top] = 1
            top += 1
            for k in range(8):
                c = child[n] + k
                if dirty[c]:
                    stack[top] = c
                    phase[top] = 0
                    top += 1
        else:
            first = child[n]
            uniform = True
            lo = np.inf
            hi = -np.inf
            obs = True
            for k in range(8):
                c = first + k
                if child[c] >= 0 or mean[c] != mean[first] or weight[c] != weight[first]:
                    uniform = False
                lo = min(lo, fmin[c])
                hi = max(hi, fmax[c])
                obs = obs and allobs[c]
            dirty[n] = 0
            if uniform:
                mean[n] = mean[first]
                weight[n] = weight[first]
                child[n] = -1
                free_blocks[state[NFREE]] = first
                state[NFREE] += 1
                _leaf_cache(n, mean, weight, fmin, fmax, allobs)
            else:
                fmin[n] = lo
                fmax[n] = hi
                allobs[n] = obs


@njit(cache=True)
def lookup(child, code, depth):
    """Leaf containing the finest voxel with Morton ``code``; returns (node, level)."""
    node = 0
    level = depth
    while child[node] >= 0:
        octant = (code >> (3 * (level - 1))) & 7
        node = child[node] + octant
        level -= 1
    return node, level


@njit(cache=True)
def free_count(child, fmin, fmax, allobs, depth, lt):
    """Number of finest voxels whose log-odds is observed and below ``lt``."""
    stack = np.empty(8 * depth + 16, dtype=np.int64)
    lv = np.empty(8 * depth + 16, dtype=np.int64)
    stack[0] = 0
    lv[0] = depth
    top = 1
    total = np.int64(0)
    while top > 0:
        top -= 1
        n = stack[top]
        level = lv[top]
        if allobs[n] and fmax[n] < lt:
            total += np.int64(1) << (3 * level)
        elif child[n] >= 0 and fmin[n] < lt:
            for k in range(8):
                stack[top] = child[n] + k
                lv[top] = level - 1
                top += 1
    return total


@njit(cache=True)
def compare_free(child_a, fmin_a, fmax_a, allobs_a, lt_a,
                 child_b, fmin_b, fmax_b, allobs_b, lt_b, depth):
    """(free in A and free in B, free in A but not free in B) voxel counts."""
    sa = np.empty(8 * depth + 16, dtype=np.int64)
    sb = np.empty(8 * depth + 16, dtype=np.int64)
    lv = np.empty(8 * depth + 16, dtype=np.int64)
    sa[0] = 0
    sb[0] = 0
    lv[0] = depth
    top = 1
    correct = np.int64(0)
    wrong = np.int64(0)
    while top > 0:
        top -= 1
        a = sa[top]
        b = sb[top]
        level = lv[top]
        if not fmin_a[a] < lt_a:
            continue
        a_full = allobs_a[a] and fmax_a[a] < lt_a
        if a_full:
            b_full = allobs_b[b] and fmax_b[b] < lt_b
            b_none = not fmin_b[b] < lt_b
            if b_full:
                correct += np.int64(1) << (3 * level)
                continue
            if b_none:
                wrong += np.int64(1) << (3 * level)
                continue
        for k in range(8):
            sa[top] = child_a[a] + k if child_a[a] >= 0 else a
            sb[top] = child_b[b] + k if child_b[b] >= 0 else b
            lv[top] = level - 1
            top += 1
    return correct, wrong


@njit(cache=True)
def fill_dense(child, mean, weight, depth, size, out_mean, out_weight):
    stack = np.empty(8 * depth + 16, dtype=np.int64)
    lv = np.empty(8 * depth + 16, dtype=np.int64)
    ox = np.empty(8 * depth + 16, dtype=np.int64)
    oy = np.empty(8 * depth + 16, dtype=np.int64)
    oz = np.empty(8 * depth + 16, dtype=np.int64)
    stack[0] = 0
    lv[0] = depth
    ox[0] = 0
    oy[0] = 0
    oz[0] = 0
    top = 1
    while top > 0:
        top -= 1
        n = stack[top]
        level = lv[top]
        x0, y0, z0 = ox[top], oy[top], oz[top]
        if child[n] < 0:
            s = np.int64(1) << level
            out_mean[x0:x0 + s, y0:y0 + s, z0:z0 + s] = mean[n]
            out_weight[x0:x0 + s, y0:y0 + s, z0:z0 + s] = weight[n]
            continue
        h = np.int64(1) << (level - 1)
        for k in range(8):
            stack[top] = child[n] + k
            lv[top] = level - 1
            ox[top] = x0 + (k & 1) * h
            oy[top] = y0 + ((k >> 1) & 1) * h
            oz[top] = z0 + ((k >> 2) & 1) * h
            top += 1


@njit(cache=True)
def fill_slice(child, mean, weight, depth, axis, index, out_mean, out_weight):
    """Write the plane ``voxel[axis] == index`` into 2D arrays (remaining axes in order)."""
    stack = np.empty(8 * depth + 16, dtype=np.int64)
    lv = np.empty(8 * depth + 16, dtype=np.int64)
    org = np.empty((8 * depth + 16, 3), dtype=np.int64)
    stack[0] = 0
    lv[0] = depth
    org[0, 0] = 0
    org[0, 1] = 0
    org[0, 2] = 0
    top = 1
    a1 = 1 if axis == 0 else 0
    a2 = 1 if axis == 2 else 2
    while top > 0:
        top -= 1
        n = stack[top]
        level = lv[top]
        s = np.int64(1) << level
        if child[n] < 0:
            i0 = org[top, a1]
            j0 = org[top, a2]
            out_mean[i0:i0 + s, j0:j0 + s] = mean[n]
            out_weight[i0:i0 + s, j0:j0 + s] = weight[n]
            continue
        h = s >> 1
        o0, o1, o2 = org[top, 0], org[top, 1], org[top, 2]
        for k in range(8):
            c0 = o0 + (k & 1) * h
            c1 = o1 + ((k >> 1) & 1) * h
            c2 = o2 + ((k >> 2) & 1) * h
            ca = c0 if axis == 0 else (c1 if axis == 1 else c2)
            if ca <= index < ca + h:
                stack[top] = child[n] + k
                lv[top] = level - 1
                org[top, 0] = c0
                org[top, 1] = c1
                org[top, 2] = c2
                top += 1


@njit(cache=True)
def audit(child, mean, weight, fmin, fmax, allobs, depth, l_min, l_max, max_weight):
    """Full-tree consistency check; returns the number of violations."""
    n_nodes = 0
    stack = np.empty(8 * depth + 16, dtype=np.int64)
    stack[0] = 0
    top = 1
    bad = 0
    while top > 0:
        top -= 1
        n = stack[top]
        n_nodes += 1
        if child[n] < 0:
            w = weight[n]
            if w < 0 or w > max_weight:
                bad += 1
            if w > 0:
                f = mean[n] * w
                if not (fmin[n] == f and fmax[n] == f and allobs[n]):
                    bad += 1
                if mean[n] < l_min or mean[n] > l_max:
                    bad += 1
            elif not (fmin[n] == np.inf and fmax[n] == -np.inf and not allobs[n]):
                bad += 1
            continue
        lo = np.inf
        hi = -np.inf
        obs = True
        for k in range(8):
            c = child[n] + k
            lo = min(lo, fmin[c])
            hi = max(hi, fmax[c])
            obs = obs and allobs[c]
            stack[top] = c
            top += 1
        if lo != fmin[n] or hi != fmax[n] or obs != allobs[n]:
            bad += 1
    return bad


@njit(cache=True)
def preorder(child, mean, weight, depth):
    """Depth-first node records: flags (1 interior, 0 leaf) and leaf payloads."""
    n_cap = child.size
    flags = np.empty(n_cap, dtype=np.uint8)
    means = np.empty(n_cap)
    weights = np.empty(n_cap, dtype=np.int32)
    stack = np.empty(8 * depth + 16, dtype=np.int64)
    stack[0] = 0
    top = 1
    nf = 0
    nl = 0
    while top > 0:
        top -= 1
        n = stack[top]
        if child[n] < 0:
            flags[nf] = 0
            means[nl] = mean[n]
            weights[nl] = weight[n]
            nl += 1
        else:
            flags[nf] = 1
            for k in range(7, -1, -1):
                stack[top] = child[n] + k
                top += 1
        nf += 1
    return flags[:nf], means[:nl], weights[:nl]


@njit(cache=True)
def from_preorder(flags, means, weights, child, mean, weight, dirty, state):
    """Rebuild a node pool from ``preorder`` output; returns False on malformed input."""
    # nodes whose children are still to be read, in the same LIFO order as preorder
    stack = np.empty(flags.size + 1, dtype=np.int64)
    stack[0] = 0
    top = 1
    state[USED] = 1
    li = 0
    for f in range(flags.size):
        if top == 0:
            return False
        top -= 1
        n = stack[top]
        dirty[n] = 1
        if flags[f] == 0:
            if li >= means.size:
                return False
            child[n] = -1
            mean[n] = means[li]
            weight[n] = weights[li]
            li += 1
        else:
            first = state[USED]
            state[USED] += 8
            child[n] = first
            for k in range(7, -1, -1):
                stack[top] = first + k
                top += 1
    return top == 0 and li == means.size
