import itertools
import json
import math

boxes = {"box_red": (1.0, 2.0), "box_blue": (8.5, 3.0), "box_green": (4.0, 9.0)}
slots = [(5.0, 7.5), (2.83, 3.75), (7.17, 3.75)]
best, best_cost = None, math.inf
for perm in itertools.permutations(range(len(slots))):
    cost = 0.0
    for (name, (x, y)), s in zip(boxes.items(), perm):
        cost += math.hypot(slots[s][0] - x, slots[s][1] - y)
    if cost < best_cost:
        best, best_cost = perm, cost
traj = {}
for k, (name, start) in enumerate(boxes.items()):
    sx, sy = slots[best[k]]
    traj[name] = [[start[0], start[1], 0], [sx, sy, k + 1]]
print("===PLAN===")
print(json.dumps({"variant": "waypoints", "trajectories": traj}))
