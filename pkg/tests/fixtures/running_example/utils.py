def relevance(document: str, keyword: str) -> float:
    return document.count(keyword) / len(document)
