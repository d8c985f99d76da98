def summarize_scores(scores_by_user):
  totals = collections.defaultdict(float)
  counts = collections.Counter()
  for user, scores in scores_by_user.items():
    for score in scores:
      totals[user] += score
      counts[user] += 1

  averages = {
      user: totals[user] / counts[user]
      for user in totals
      if counts[user] > 0
  }
  best_user = max(averages, key=averages.get) if averages else None
  return averages, best_user
