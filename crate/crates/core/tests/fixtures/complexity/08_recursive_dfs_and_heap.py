import heapq
import json

graph = {"A": ["B", "C"], "B": ["D"], "C": ["D"], "D": []}


def dfs(node, goal, path):
    if node == goal:
        return path
    for nxt in graph[node]:
        found = dfs(nxt, goal, path + [nxt])
        if found:
            return found
    return None


heap = [(0, "A")]
order = []
while heap:
    cost, node = heapq.heappop(heap)
    order.append(node)
    for nxt in graph[node]:
        heapq.heappush(heap, (cost + 1, nxt))
print(json.dumps(dfs("A", "D", ["A"])))
