def _get_line_number_prefix(line_number: int) -> str:
  if line_number >= 1000:
    raise ValueError(f'The line number {line_number} is too big.')
  if line_number <= 0:
    # TODO: handle negative numbers?
    raise ValueError(f'The line number must be positive: {line_number}')
  # TODO: turn the width and the separator (currently a tab) into parameters
  return f'{line_number:>3d}\t'
