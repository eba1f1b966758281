import json
import sys

args = json.load(sys.stdin)
unknown = set(args) - {"values"}
if unknown:
    sys.exit("unexpected arguments: %s" % ", ".join(sorted(unknown)))
print(json.dumps({"total": float(sum(args["values"]))}))
