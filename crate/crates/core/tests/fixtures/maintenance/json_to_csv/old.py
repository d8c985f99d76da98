def summarize_orders(path: str) -> float:
  """Reads orders from a JSON file and returns the total value."""
  #* Read the orders from the JSON file.
  with open(path) as f:
    orders = json.load(f)
  #* Add up the total value over all orders.
  total = 0.0
  for order in orders:
    total += order["quantity"] * order["price"]
  #* Log and return the total value.
  logging.info("Total value: %f", total)
  return total
