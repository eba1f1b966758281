# [imports]
import json

# [helpers]

# [entry]
# [parameters]
# catalog: str = "small"
# [/parameters]
def solve(tools, catalog="small"):
    tools["ItemCatalog"].execute(catalog=catalog)
    return {"catalog": catalog, "selection": []}
