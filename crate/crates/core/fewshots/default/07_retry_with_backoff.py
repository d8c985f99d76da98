def retry_with_backoff(fn, max_attempts=5, base_delay=0.5, retry_on=(IOError,)):
  attempt = 0
  while True:
    try:
      return fn()
    except retry_on as e:
      attempt += 1
      if attempt >= max_attempts:
        raise RuntimeError(f'Gave up after {attempt} attempts') from e
    # Jitter avoids synchronized retries across workers.
    delay = base_delay * (2 ** (attempt - 1))
    delay *= random.uniform(0.5, 1.5)
    time.sleep(delay)
