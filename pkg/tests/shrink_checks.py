"""Independent checks of a shrink step from its inputs and outputs."""


def induced(edges, W):
    W = set(W)
    return len(W) + sum(1 for u, v in edges if u in W and v in W)


def shrink_violations(chi, chi0, chi1, config, trace):
    w = [float(x) for x in chi.weights]
    edges = [tuple(e) for e in chi.graph.edges.tolist()]
    k = chi.k
    eps, M = config.epsilon, config.M
    W = [v for v, c in enumerate(chi.colors.tolist()) if c >= 0]
    W0 = [v for v, c in enumerate(chi0.colors.tolist()) if c >= 0]
    W1 = [v for v, c in enumerate(chi1.colors.tolist()) if c >= 0]
    out = []
    if set(W0) & set(W1) or sorted(W0 + W1) != W:
        out.append("W0 and W1 do not partition W")
    avg = sum(w[v] for v in W) / k
    top = max(w[v] for v in W)
    tol = 1e-9 * max(1.0, avg)
    sums0 = [0.0] * k
    for v in W0:
        sums0[chi0.colors[v]] += w[v]
    for i, s in enumerate(sums0):
        extra = s - eps * avg
        if extra < -tol or extra > top + tol:
            out.append(f"chi0 class {i} is {extra} above eps * avg")
    sums1 = [0.0] * k
    for v in W1:
        sums1[chi1.colors[v]] += w[v]
    avg1 = sum(sums1) / k
    if max(sums1) > M * avg1 + tol:
        out.append("chi1 is not weakly balanced")
    if induced(edges, W1) > (1 - eps ** 10) * induced(edges, W):
        out.append("the instance did not shrink")
    if trace.source & trace.sink:
        out.append("a color is both source and sink")
    if trace.changes is not None and max(trace.changes.tolist(), default=0) > config.shrink_cap:
        out.append("a class changed too often")
    return out
