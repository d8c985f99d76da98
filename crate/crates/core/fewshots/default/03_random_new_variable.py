def random_new_variable(existing_variables: List[str],
                        ordered: bool) -> str:
  """Returns a new variable token not in existing_variables."""
  if ordered:
    for i in range(dsl.MAX_NUM_VARIABLES):
      v = dsl.variable_token(i)
      if v not in existing_variables:
        return v
    raise ValueError('Could not find new variable.')
  else:
    choices = list(dsl.ALL_VARIABLES - set(existing_variables))
    if not choices:
      raise ValueError('Could not find new variable.')
    return random.choice(choices)
