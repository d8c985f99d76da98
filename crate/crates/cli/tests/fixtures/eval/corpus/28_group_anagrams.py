def group_anagrams(words):
  groups = collections.defaultdict(list)
  for word in words:
    key = "".join(sorted(word.lower()))
    groups[key].append(word)
  result = [sorted(g) for g in groups.values() if len(g) > 1]
  result.sort(key=len, reverse=True)
  return result
