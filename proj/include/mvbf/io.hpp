#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mvbf/body_model.hpp"
#include "mvbf/fit.hpp"
#include "mvbf/metrics.hpp"
#include "mvbf/observe.hpp"

namespace mvbf {

// FNV-1a over a canonical serialization; embedded in file headers to catch
// cross-asset mixups.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed);
std::string topology_hash(const BodyModel& model);
std::string landmark_set_hash(const LandmarkSet& set);

BodyModel load_body_model(const std::string& path);
void save_body_model(const BodyModel& model, const std::string& path);
// "builtin:toy" or a model file path.
BodyModel resolve_body_model(const std::string& spec);

LandmarkSet load_landmark_set(const std::string& path);
void save_landmark_set(const LandmarkSet& set, const std::string& path);

struct MotionData {
  std::string model_name;
  std::string topology_hash;
  int num_betas = 0;
  int num_joints = 0;
  double fps = 30.0;
  std::vector<std::string> person_ids;
  std::vector<std::map<std::string, BodyParams>> frames;
};

MotionData load_motion(const std::string& path);
void save_motion(const MotionData& motion, const std::string& path);

struct ObservationData {
  std::string rig_name;
  std::string landmark_hash;
  int num_landmarks = 0;
  double fps = 30.0;
  std::vector<std::string> camera_names;
  std::vector<std::string> person_ids;
  std::vector<FrameObservations> frames;
};

ObservationData load_observations(const std::string& path);
void save_observations(const ObservationData& data, const std::string& path);

std::vector<MarkerSpec> load_markers(const std::string& path);
void save_markers(const std::vector<MarkerSpec>& specs, const std::string& path);

// FitConfig file mirrors the struct; absent keys keep their defaults.
FitConfig load_fit_config(const std::string& path);

void save_metrics_report(const MetricsReport& report, const std::string& path);
void save_metrics_series(const MetricsReport& report, const std::string& path);

void save_trace(const std::vector<TraceEntry>& trace, const std::string& path);
void save_energy_log(const std::vector<PersonFit>& persons, const std::string& path);

}  // namespace mvbf
