"""Tour of API-usage standardization: every reference form the walker handles.

No bank needed; this demonstrates the notebook-analysis layer in isolation.
"""

from envsniff.notebook_analysis import CodeCell, collect_usages, sanitize_cell

SNIPPETS = {
    "plain module call": "import pandas\npandas.read_excel('f.xlsx')",
    "module alias": "import pandas as pd\npd.read_excel('f.xlsx', sheet_name=0)",
    "from-import alias": "from pandas import read_excel as re\nre('f.xlsx')",
    "private module form": "from pandas.io.excel import _base\n_base.read_excel('f.xlsx')",
    "instance tracing": "from sklearn.svm import SVC\nmodel = SVC()\nmodel.fit(X, y)",
    "chained constructor": "import pandas as pd\npd.DataFrame(data).head()",
    "star import (low confidence)": "from pandas import *\nread_csv('f.csv')",
    "local shadowing": "from pandas import read_excel\ndef read_excel(p):\n    return p\nread_excel('f')",
    "stdlib filtered out": "import os, json\njson.dumps(os.getcwd())",
}


def main() -> None:
    for title, source in SNIPPETS.items():
        usage_set = collect_usages([CodeCell(0, 1, source)])
        print(f"== {title}")
        for line in source.splitlines():
            print(f"   | {line}")
        if not usage_set.usages:
            print("   -> no third-party usages")
        for usage in sorted(usage_set.usages, key=lambda u: u.fqn):
            call = usage.call if isinstance(usage.call, str) else (
                f"{usage.call.positional_count} positional"
                + (f", keywords {usage.call.keyword_names}" if usage.call.keyword_names else "")
            )
            flag = " (low confidence)" if usage.low_confidence else ""
            print(f"   -> {usage.fqn} [{usage.origin}; {call}]{flag}")
        print()

    print("== magic stripping")
    notes: list[str] = []
    cleaned = sanitize_cell("%matplotlib inline\n!pip install pandas\nimport pandas\npandas.read_excel?", notes)
    print(f"   kept: {cleaned!r}")
    print(f"   notes: {notes}")


if __name__ == "__main__":
    main()
