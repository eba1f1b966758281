"""Regenerates the scripted transcripts and the bench suite from code/."""
import json
import os
import shutil

HERE = os.path.dirname(os.path.abspath(__file__))


def code(name):
    with open(os.path.join(HERE, "code", name)) as fh:
        return fh.read()


def fence(tag, body):
    return "```%s\n%s\n```" % (tag, body.rstrip("\n"))


def entry(prompt, response, contains=None):
    e = {"prompt": prompt, "response": response}
    if contains:
        e["contains"] = contains
    return e


def json_reply(doc):
    return fence("json", json.dumps(doc, indent=2))


def variant(description, name):
    return fence("description", description) + "\n\n" + fence("python", code(name))


SUM_QUESTION = "Add the numbers 3, 4.5 and 12.5 with the available tools and report the total."
KNAPSACK_QUESTION = (
    "Choose items from the item catalog named small so that the total value is as large as "
    "possible while the total weight stays within the catalog capacity."
)

ASSIST = [
    entry("p_cls", json_reply({"task_type": "assist"})),
    entry("p_plan", json_reply({
        "subtasks": [{"description": "Add the three numbers with SumValues", "tools": ["SumValues"]}],
        "rationale": "A single tool call computes the total.",
    })),
    entry("p_gen", fence("python", code("sum_buggy.py"))),
    entry("p_dbg", fence("python", code("sum_fixed.py")), contains="unexpected arguments"),
    entry("p_gen_eval_assist", fence("python", code("sum_evaluator.py"))),
]

OPT_HEAD = [
    entry("p_cls", json_reply({"task_type": "opt"})),
    entry("p_fm", json_reply({
        "I_in": "a catalog name whose items carry a value and a weight, plus a capacity",
        "I_out": "the catalog name and the indices of the chosen items",
        "I_inst": "maximize total value subject to the weight limit",
        "g_raw": "higher total value of a feasible selection is better",
        "a_gt": 1000,
    })),
    entry("p_plan", json_reply({
        "subtasks": [
            {"description": "Load the catalog", "tools": ["ItemCatalog"]},
            {"description": "Fill the knapsack in catalog order", "tools": []},
        ],
        "rationale": "Start from a simple feasible selection.",
    })),
    entry("p_gen", fence("python", code("knapsack_seed.py"))),
    entry("p_plan_eval", json_reply({
        "subtasks": [
            {"description": "Reload the catalog named in the result", "tools": ["ItemCatalog"]},
            {"description": "Check feasibility and value, divide by the optimum", "tools": ["CheckSelection"]},
        ]
    })),
    entry("p_gen_eval", fence("python", code("knapsack_evaluator.py"))),
]

# Two generations with M1 only: 0.270 -> 0.475 -> 0.535.
OPT_CLIMB = OPT_HEAD + [
    entry("p_mut_m1", variant("Allow a second item in the prefix fill.", "knapsack_v2.py")),
    entry("p_mut_m1", variant("Allow a third item in the prefix fill.", "knapsack_v3.py")),
]

# Two generations of M1 and M2 where every variant is worse than the seed.
OPT_WORSE = OPT_HEAD + [
    entry("p_mut_m1", variant("Return no items.", "knapsack_empty.py")),
    entry("p_mut_m2", variant("Take every item.", "knapsack_overfull.py")),
    entry("p_mut_m1", variant("Index items by a missing key.", "knapsack_crash.py")),
    entry("p_mut_m2", variant("Return no items.", "knapsack_empty.py")),
]

# One generation of the default operators (crossovers skipped) for the bench.
OPT_BENCH = OPT_HEAD + [
    entry("p_mut_m1", variant("Allow a second item in the prefix fill.", "knapsack_v2.py")),
    entry("p_mut_m2", variant("Allow a third item in the prefix fill.", "knapsack_v3.py")),
    entry("p_mut_m3", variant("Index items by a missing key.", "knapsack_crash.py")),
    entry("p_param", fence("python", '{"catalog": "small"}')),
]

REFERENCE_PARAM = [entry("p_param", fence("python", '{"catalog": "small"}'))]


def write_json(path, doc):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_task(name, task, solver, evaluator):
    d = os.path.join(HERE, "suite", name)
    os.makedirs(d, exist_ok=True)
    write_json(os.path.join(d, "task.json"), task)
    shutil.copy(os.path.join(HERE, "code", solver), os.path.join(d, "solve.py"))
    shutil.copy(os.path.join(HERE, "code", evaluator), os.path.join(d, "evaluate.py"))


def main():
    scripts = os.path.join(HERE, "scripts")
    write_json(os.path.join(scripts, "assist_solve.json"), ASSIST)
    write_json(os.path.join(scripts, "opt_climb.json"), OPT_CLIMB)
    write_json(os.path.join(scripts, "opt_worse.json"), OPT_WORSE)
    bench = os.path.join(HERE, "bench_scripts")
    write_json(os.path.join(bench, "sum-values.json"), ASSIST)
    write_json(os.path.join(bench, "knapsack.json"), OPT_BENCH)
    write_json(os.path.join(bench, "knapsack.reference.json"), REFERENCE_PARAM)
    write_task("sum-values", {
        "id": "sum-values",
        "question": SUM_QUESTION,
        "task_type": "assist",
        "candidate_tools": ["SumValues"],
        "reference": {"total": 20.0},
    }, "sum_fixed.py", "sum_task_evaluator.py")
    write_task("knapsack", {
        "id": "knapsack",
        "question": KNAPSACK_QUESTION,
        "task_type": "opt",
        "candidate_tools": ["ItemCatalog"],
        "train_instances": [{"kwargs": {"catalog": "train1"}, "reference": 650}],
        "test_instances": [
            {"kwargs": {"catalog": "test1"}, "reference": 500},
            {"question": "Pack the knapsack for the catalog named small.", "reference": 1000},
        ],
    }, "knapsack_exact.py", "knapsack_evaluator.py")
    with open(os.path.join(HERE, "questions", "assist.txt"), "w") as fh:
        fh.write(SUM_QUESTION + "\n")
    with open(os.path.join(HERE, "questions", "opt.txt"), "w") as fh:
        fh.write(KNAPSACK_QUESTION + "\n")


if __name__ == "__main__":
    os.makedirs(os.path.join(HERE, "questions"), exist_ok=True)
    main()
