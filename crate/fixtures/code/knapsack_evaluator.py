import json

from tools_shim import load_tools


def main():
    with open("args.json") as fh:
        args = json.load(fh)
    with open(args["result_path"]) as fh:
        result = json.load(fh)
    with open(args["reference_path"]) as fh:
        optimum = float(json.load(fh))
    tools = load_tools()
    answer = result["value"]
    data = tools["ItemCatalog"].execute(catalog=answer["catalog"])
    check = tools["CheckSelection"].execute(
        items=data["items"], capacity=data["capacity"], selection=answer["selection"]
    )
    score = check["value"] / optimum if check["feasible"] and optimum > 0 else 0.0
    with open("score.json", "w") as fh:
        json.dump({"score": score}, fh)


main()
