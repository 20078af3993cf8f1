#pragma once

#include <stdexcept>
#include <string>

namespace tromux {

// Error categories map onto CLI exit codes: io/parse/validation -> 2,
// semantic -> 3, internal -> 4.
enum class errc { io, parse, validation, semantic, internal };

class Error : public std::runtime_error {
      public:
	Error(errc kind, std::string code, const std::string &msg)
	    : std::runtime_error(code + ": " + msg), kind_(kind), code_(std::move(code))
	{
	}

	errc kind() const { return kind_; }
	const std::string &code() const { return code_; }

	int exit_code() const
	{
		switch (kind_) {
		case errc::io:
		case errc::parse:
		case errc::validation:
			return 2;
		case errc::semantic:
			return 3;
		case errc::internal:
			return 4;
		}
		return 4;
	}

      private:
	errc kind_;
	std::string code_;
};

[[noreturn]] inline void fail(errc kind, const std::string &code, const std::string &msg)
{
	throw Error(kind, code, msg);
}

} // namespace tromux
