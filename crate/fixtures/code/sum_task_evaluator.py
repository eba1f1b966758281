import json

with open("args.json") as fh:
    args = json.load(fh)
with open(args["result_path"]) as fh:
    result = json.load(fh)
with open(args["reference_path"]) as fh:
    reference = json.load(fh)
value = result.get("value")
total = value.get("total") if isinstance(value, dict) else None
ok = isinstance(total, (int, float)) and abs(total - reference["total"]) < 1e-9
with open("score.json", "w") as fh:
    json.dump({"score": 1.0 if ok else 0.0}, fh)
