from DataStore import DataStore


def search(ds: DataStore, keyword: str, top_k: int):
    docs = ds.find_by_keyword(keyword)
