import json

plan = {"variant": "actions", "steps": [[{"robot": "robot", "action": "move_up", "args": []}]]}
print("===PLAN===")
print(json.dumps(plan))
