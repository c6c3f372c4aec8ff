import json
from collections import deque

W, H = 4, 4
walls = {(1, 1), (2, 1)}
start, goal = (0, 0), (3, 3)
moves = {"move_up": (-1, 0), "move_down": (1, 0), "move_left": (0, -1), "move_right": (0, 1)}

queue = deque([(start, [])])
seen = {start}
path = None
while queue:
    (r, c), acts = queue.popleft()
    if (r, c) == goal:
        path = acts
        break
    for name, (dr, dc) in moves.items():
        nxt = (r + dr, c + dc)
        if 0 <= nxt[0] < H and 0 <= nxt[1] < W and nxt not in walls and nxt not in seen:
            seen.add(nxt)
            queue.append((nxt, acts + [name]))

steps = [[{"robot": "robot", "action": a, "args": []}] for a in path + ["visit_goal"]]
print("===PLAN===")
print(json.dumps({"variant": "actions", "steps": steps}))
