"""Driver: calls solver.solve(tools, **kwargs) and writes result.json."""
import json
import os
import sys
import traceback

sys.path.insert(0, os.getcwd())


def _write(doc):
    with open("result.json", "w") as fh:
        json.dump(doc, fh)


def main():
    args = {}
    if os.path.exists("args.json"):
        with open("args.json") as fh:
            args = json.load(fh)
    kwargs = args.get("kwargs") or {}
    from tools_shim import load_tools

    tools = load_tools(args.get("tools_manifest", "tools.json"))
    try:
        import solver

        value = solver.solve(tools, **kwargs)
    except BaseException as exc:
        traceback.print_exc()
        _write({"status": "error", "error": "%s: %s" % (type(exc).__name__, exc)})
        sys.exit(1)
    try:
        json.dumps(value)
    except (TypeError, ValueError) as exc:
        msg = "solve() returned a non-JSON value of type %s: %s" % (type(value).__name__, exc)
        print(msg, file=sys.stderr)
        _write({"status": "error", "error": msg})
        sys.exit(1)
    doc = {"status": "ok", "value": value}
    candidates = value if isinstance(value, list) else [value]
    files = [os.path.abspath(v) for v in candidates if isinstance(v, str) and os.path.isfile(v)]
    if files:
        doc["files"] = files
    _write(doc)


if __name__ == "__main__":
    main()
