import json

steps = []
for name in ["move_right", "move_right", "visit_goal"]:
    steps.append([{"robot": "robot", "action": name, "args": []}])
print("===PLAN===")
print(json.dumps({"variant": "actions", "steps": steps}))
