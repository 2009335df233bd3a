def read_excel(io, sheet_name=0):
    return {"path": io, "sheet": sheet_name}
