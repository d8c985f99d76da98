def split_dataset(examples, train_fraction, seed):
  rng = random.Random(seed)
  shuffled = list(examples)
  rng.shuffle(shuffled)
  cut = int(len(shuffled) * train_fraction)
  train, test = shuffled[:cut], shuffled[cut:]
  if not train or not test:
    raise ValueError("both splits must be non-empty")
  return train, test
