#include "polka_te/bus.hpp"

#include <istream>
#include <ostream>

namespace polka_te {

nlohmann::json BusMessage::to_json() const { return {{"seq", seq}, {"topic", topic}, {"payload", payload}}; }

BusMessage BusMessage::from_json(const nlohmann::json& j) {
    return {j.at("seq").get<std::uint64_t>(), j.at("topic").get<std::string>(), j.at("payload")};
}

BusMessage Bus::publish(const std::string& topic, nlohmann::json payload) {
    std::lock_guard lock(mutex_);
    BusMessage msg{log_.size() + 1, topic, std::move(payload)};
    log_.push_back(msg);
    for (const auto& [_, h] : handlers_) h(msg);
    return msg;
}

int Bus::subscribe(Handler handler) {
    std::lock_guard lock(mutex_);
    const int id = next_handler_++;
    handlers_.emplace(id, std::move(handler));
    return id;
}

void Bus::unsubscribe(int id) {
    std::lock_guard lock(mutex_);
    handlers_.erase(id);
}

std::vector<BusMessage> Bus::log() const {
    std::lock_guard lock(mutex_);
    return log_;
}

std::vector<BusMessage> Bus::since(std::uint64_t after) const {
    std::lock_guard lock(mutex_);
    if (after >= log_.size()) return {};
    return {log_.begin() + static_cast<std::ptrdiff_t>(after), log_.end()};
}

std::size_t Bus::size() const {
    std::lock_guard lock(mutex_);
    return log_.size();
}

void Bus::write_ndjson(std::ostream& os) const {
    for (const auto& m : log()) os << m.to_json().dump() << '\n';
}

std::vector<BusMessage> Bus::read_ndjson(std::istream& is) {
    std::vector<BusMessage> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(BusMessage::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("bus log line " + std::to_string(line_no) + ": " + e.what());
        }
        if (out.size() > 1 && out.back().seq <= out[out.size() - 2].seq) {
            throw std::invalid_argument("bus log line " + std::to_string(line_no) + ": seq is not increasing");
        }
    }
    return out;
}

}  // namespace polka_te
