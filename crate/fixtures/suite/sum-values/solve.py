# [imports]
import json

# [helpers]

# [entry]
# [parameters]
# values: tuple = (3, 4.5, 12.5)
# [/parameters]
def solve(tools, values=(3, 4.5, 12.5)):
    return tools["SumValues"].execute(values=list(values))
