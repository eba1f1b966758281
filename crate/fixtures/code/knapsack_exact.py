# [imports]
import itertools
import json

# [helpers]
def _best_subset(items, capacity):
    best, best_value = [], -1
    for r in range(len(items) + 1):
        for combo in itertools.combinations(range(len(items)), r):
            weight = sum(items[i]["weight"] for i in combo)
            value = sum(items[i]["value"] for i in combo)
            if weight <= capacity and value > best_value:
                best, best_value = list(combo), value
    return best

# [entry]
# [parameters]
# catalog: str = "small"
# [/parameters]
def solve(tools, catalog="small"):
    data = tools["ItemCatalog"].execute(catalog=catalog)
    return {"catalog": catalog, "selection": _best_subset(data["items"], data["capacity"])}
