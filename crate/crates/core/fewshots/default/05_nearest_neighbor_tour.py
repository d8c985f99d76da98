def nearest_neighbor_tour(nodes):
  distances = scipy.spatial.distance_matrix(nodes, nodes)
  current_node = 0
  tour = [current_node]
  tour_cost = 0.0
  distance_to_start = distances[current_node].copy()

  for _ in range(len(nodes) - 1):
    distances[:, current_node] = np.Inf
    neighbor = distances[current_node].argmin()
    tour_cost += distances[current_node][neighbor]
    tour.append(neighbor)
    current_node = neighbor

  tour_cost += distance_to_start[current_node]
  return tour_cost, tour
