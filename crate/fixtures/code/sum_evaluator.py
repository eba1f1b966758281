import json

with open("args.json") as fh:
    args = json.load(fh)
with open(args["result_path"]) as fh:
    result = json.load(fh)
value = result.get("value")
total = value.get("total") if isinstance(value, dict) else None
expected = sum([3, 4.5, 12.5])
ok = isinstance(total, (int, float)) and abs(total - expected) < 1e-9
with open("score.json", "w") as fh:
    json.dump({"score": 1.0 if ok else 0.0}, fh)
