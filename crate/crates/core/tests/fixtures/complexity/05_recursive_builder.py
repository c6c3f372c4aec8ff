import json


def build(tower, i):
    if i == len(tower):
        return []
    return [("stack" if i else "pick_up", tower[i])] + build(tower, i + 1)


actions = build(["A", "B", "C"], 0)
print("===PLAN===")
print(json.dumps({"variant": "actions", "steps": []}))
