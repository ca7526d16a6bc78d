#pragma once

#include <string>
#include <vector>

#include "mrn/network.hpp"

namespace mrn {

struct CatalogEntry {
    std::string id;
    std::vector<std::string> presets;
    std::string description;
};

std::vector<CatalogEntry> catalog();

// "id" or "id:preset", e.g. "opinion:liberal", "neural:synchronous", "transcription".
Network builtin_model(const std::string& ref);
Network builtin_model(const std::string& id, const std::string& preset);

// Factories with explicit parameters.
Network autocatalator();
Network sir_model(double k1 = 0.3, double k2 = 1.0, std::int64_t s0 = 10, std::int64_t i0 = 2, std::int64_t r0 = 0);
Network pharmacokinetic_model();
Network opinion_model(int L, double k1, double k2, double a1, double a2, double a3);
Network opinion_preset(const std::string& preset);
Network neural_model(double nuE, double nuI, int L = 100, double gamma = 0.1, double h = 0.001);
Network neural_preset(const std::string& preset);
// Weights with nuE + nuI = 0.004 and nuE - nuI = delta.
Network neural_sweep_model(double delta);
Network transcription_model();
Network birth_death_model(double kb, double kd, std::int64_t max, std::int64_t x0 = 0);
Network isomerization_model(double kf, double kb, std::int64_t total = 1);

}  // namespace mrn
