#ifndef IPGP_DATASET_IO_HPP
#define IPGP_DATASET_IO_HPP

#include <string>

#include "ipgp/systems.hpp"

namespace ipgp {

// Single JSON document:
// {"d":int,"N":int,"M":int,"L":int,"times":[...],"noise_sigma":x,
//  "Y":[[2dN floats x L] x M],"Z":[[dN floats x L] x M]}
std::string dataset_to_json(const TrajectoryDataset& data);
TrajectoryDataset dataset_from_json(const std::string& text);

void save_dataset(const TrajectoryDataset& data, const std::string& path);
TrajectoryDataset load_dataset(const std::string& path);

// CSV frames: one row per frame, columns x_1^(1..d), ..., x_N^(1..d).
// Returns a d*N x n_frames matrix.
mat load_frames_csv(const std::string& path, int d);

// Min-max normalization of each spatial coordinate into [0, 1].
void normalize_frames(mat& frames, int d);

} // namespace ipgp

#endif
