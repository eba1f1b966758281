"""Subprocess-backed tool handles.

Each tool is launched as a child process: keyword arguments are sent as a JSON
object on stdin and the tool answers with a JSON document as the last
non-empty line of stdout.
"""
import json
import os
import subprocess
import sys


class ToolError(RuntimeError):
    pass


class Tool:
    def __init__(self, name, entry, root):
        self.name = name
        self.entry = entry
        self.root = root

    def _command(self):
        if self.entry.endswith(".py"):
            return [sys.executable, self.entry]
        return [self.entry]

    def execute(self, **kwargs):
        env = dict(os.environ)
        env["TOOL_ROOT"] = self.root
        proc = subprocess.run(
            self._command(),
            input=json.dumps(kwargs),
            capture_output=True,
            text=True,
            env=env,
        )
        if proc.returncode != 0:
            raise ToolError(
                "tool %s failed with exit code %d: %s"
                % (self.name, proc.returncode, proc.stderr[-4000:])
            )
        lines = [l for l in proc.stdout.splitlines() if l.strip()]
        if not lines:
            raise ToolError("tool %s produced no output" % self.name)
        try:
            return json.loads(lines[-1])
        except ValueError as exc:
            raise ToolError("tool %s returned invalid JSON: %s" % (self.name, exc))


def load_tools(manifest="tools.json"):
    base = os.path.dirname(os.path.abspath(manifest))
    if not os.path.exists(manifest):
        return {}
    with open(manifest) as fh:
        spec = json.load(fh)
    tools = {}
    for name, info in spec.items():
        root = info["root"]
        if not os.path.isabs(root):
            root = os.path.join(base, root)
        entry = os.path.join(root, info["entry"])
        tools[name] = Tool(name, entry, root)
    return tools
