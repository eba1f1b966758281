# [imports]
import json

# [helpers]

# [entry]
# [parameters]
# catalog: str = "small"
# [/parameters]
def solve(tools, catalog="small"):
    data = tools["ItemCatalog"].execute(catalog=catalog)
    return {"catalog": catalog, "selection": [data["items"][0]["index"]]}
