import json
import sys

args = json.load(sys.stdin)
items, selection = args["items"], args["selection"]
valid = len(set(selection)) == len(selection) and all(
    isinstance(i, int) and 0 <= i < len(items) for i in selection
)
weight = sum(items[i]["weight"] for i in selection) if valid else 0
value = sum(items[i]["value"] for i in selection) if valid else 0
print(json.dumps({"feasible": valid and weight <= args["capacity"], "value": float(value)}))
