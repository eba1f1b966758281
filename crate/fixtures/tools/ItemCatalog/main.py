import json
import os
import sys

args = json.load(sys.stdin)
path = os.path.join(os.environ["TOOL_ROOT"], "catalogs", args["catalog"] + ".json")
with open(path) as fh:
    print(json.dumps(json.load(fh)))
