#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tractrl/phantom.hpp"
#include "tractrl/tensor.hpp"
#include "tractrl/tractogram.hpp"

namespace tractrl {

// All containers are little-endian with f32 payloads:
//   "PHV1" phantom volume, "TSF1" tractogram, "TNSR" named tensor archive.
// Writers are atomic (temp file + rename).

void save_phantom(const PhantomVolume& v, const std::string& path);
PhantomVolume load_phantom(const std::string& path);

void save_tractogram(const Tractogram& t, const std::string& path);
Tractogram load_tractogram(const std::string& path);

// One score per line, 6 decimals; used both for oracle outputs and for the
// 0/1 targets of labeled training sets.
void save_scores(const std::vector<double>& scores, const std::string& path);
std::vector<double> load_scores(const std::string& path);

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;
void save_tensors(const NamedTensors& tensors, const std::string& path);
NamedTensors load_tensors(const std::string& path);

// One-way export to MRtrix .tck for external viewers.
void export_tck(const Tractogram& t, const std::string& path);

void atomic_write_file(const std::string& path, const std::vector<uint8_t>& bytes);
void atomic_write_text(const std::string& path, const std::string& text);
std::vector<uint8_t> read_file(const std::string& path);
uint64_t file_checksum(const std::string& path);

}  // namespace tractrl
