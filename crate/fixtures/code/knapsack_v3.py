# [imports]
import json

# [helpers]
def _prefix_fill(items, capacity, max_items):
    chosen, weight = [], 0
    for i, item in enumerate(items):
        if len(chosen) == max_items:
            break
        if weight + item["weight"] <= capacity:
            chosen.append(i)
            weight += item["weight"]
    return chosen

# [entry]
# [parameters]
# catalog: str = "small"
# max_items: int = 3
# [/parameters]
def solve(tools, catalog="small", max_items=3):
    data = tools["ItemCatalog"].execute(catalog=catalog)
    selection = _prefix_fill(data["items"], data["capacity"], max_items)
    return {"catalog": catalog, "selection": selection}
