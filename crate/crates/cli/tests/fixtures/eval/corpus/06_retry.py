def retry(func, attempts=3, delay=0.5):
  last_error = None
  for attempt in range(attempts):
    try:
      return func()
    except IOError as e:
      last_error = e
      logging.warning("attempt %d failed: %s", attempt + 1, e)
      time.sleep(delay * 2 ** attempt)
  raise last_error
