def load_key_value_config(path: str, defaults: dict[str, str]) -> dict[str, str]:
  """Reads `key = value` lines from a file, falling back to defaults."""
  config = dict(defaults)
  with open(path) as f:
    lines = f.read().splitlines()

  for number, line in enumerate(lines, start=1):
    line = line.strip()
    if not line or line.startswith('#'):
      continue
    if '=' not in line:
      raise ValueError(f'{path}:{number}: expected key = value')
    key, value = line.split('=', 1)
    config[key.strip()] = value.strip()

  missing = [k for k, v in config.items() if not v]
  if missing:
    logging.warning('Empty config values: %s', ', '.join(missing))
  return config
