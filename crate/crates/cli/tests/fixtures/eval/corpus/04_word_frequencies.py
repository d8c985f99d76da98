def word_frequencies(text, top_n=10):
  words = re.findall(r"[a-z']+", text.lower())
  counts = collections.Counter(words)
  for stop in ("the", "a", "an", "and"):
    counts.pop(stop, None)
  ranked = counts.most_common(top_n)
  total = sum(counts.values())
  return [(word, count / total) for word, count in ranked]
