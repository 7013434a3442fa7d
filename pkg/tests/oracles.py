"""Independent reference implementations the engine is checked against.

These deliberately share no code with the package: closure by Floyd-Warshall,
components by union-find, shortest paths by Dijkstra, bonuses by explicit
descendant walks, least squares in closed form (numpy, in the tests that
need it).
"""
from __future__ import annotations

import heapq


def warshall_closure(nodes: set, edges: set[tuple]) -> set[tuple]:
    """All (a, b) with a directed path a -> b of length >= 1."""
    reach = {n: set() for n in nodes}
    for a, b in edges:
        reach[a].add(b)
    for k in nodes:
        for a in nodes:
            if k in reach[a]:
                reach[a] |= reach[k]
    return {(a, b) for a in nodes for b in reach[a]}


def union_find_components(edges: set[tuple]) -> set[tuple]:
    """(node, min node id of its component) for every node on an edge."""
    parent: dict = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    labels: dict = {}
    for n in list(parent):
        root = find(n)
        labels[root] = min(labels.get(root, n), n)
    return {(n, labels[find(n)]) for n in parent}


def dijkstra(edges: set[tuple], source) -> dict:
    """node -> distance for everything reachable from ``source``."""
    adjacency: dict = {}
    for a, b, w in edges:
        adjacency.setdefault(a, []).append((b, w))
    dist = {source: 0.0}
    heap = [(0.0, source)]
    while heap:
        d, node = heapq.heappop(heap)
        if d > dist.get(node, float("inf")):
            continue
        for succ, w in adjacency.get(node, []):
            nd = d + w
            if nd < dist.get(succ, float("inf")):
                dist[succ] = nd
                heapq.heappush(heap, (nd, succ))
    return dist


def mlm_bonus(sales: dict, sponsor: set[tuple], proportion: float) -> dict:
    """bonus(m) = sales(m) + proportion * sum of all strict descendants' sales.

    ``sponsor`` holds (recruiter, recruit) pairs and must form a forest.
    """
    children: dict = {}
    for who, recruit in sponsor:
        children.setdefault(who, []).append(recruit)

    def descendants(m) -> list:
        out = []
        stack = list(children.get(m, []))
        while stack:
            d = stack.pop()
            out.append(d)
            stack.extend(children.get(d, []))
        return out

    return {
        m: s + proportion * sum(sales.get(d, 0.0) for d in descendants(m))
        for m, s in sales.items()
    }
